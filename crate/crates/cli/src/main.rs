use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kerrsim::commands::{self, CliError, Context};
use kerrsim::config;

#[derive(Parser)]
#[command(name = "kerrsim", version, about = "Driven dissipative Kerr oscillator simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Records that the run uses no random numbers. Every run is deterministic.
    #[arg(long, global = true)]
    seedless: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic steady state over a drive grid, optional TEBD end states and Wigner maps.
    SteadySweep,
    /// Time evolution with trajectory CSV and Wigner frames.
    Evolve,
    /// TEBD, Lindblad and analytic reference on one parameter point.
    Compare,
    /// Print the bath chain coefficients.
    ChainInfo,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(vec![format!("--threads: {e}")]))?;
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config(vec!["--config PATH is required".into()]))?;
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    let config = config::parse(&raw).map_err(CliError::Config)?;
    let ctx = Context {
        config: &config,
        raw: &raw,
        out: cli.out.as_deref(),
        seedless: cli.seedless,
    };
    match cli.command {
        Command::SteadySweep => commands::steady_sweep(&ctx).map(|_| ()),
        Command::Evolve => commands::evolve(&ctx).map(|_| ()),
        Command::Compare => commands::compare(&ctx).map(|(_, report)| {
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }),
        Command::ChainInfo => commands::chain_info(&ctx).map(|json| println!("{json}")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kerrsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
