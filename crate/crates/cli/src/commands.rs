//! The four subcommands. Each returns its manifest or a [`CliError`] that
//! carries the process exit code.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use kerr_tebd::{
    analytic, build_chain, build_gates, evolve as run_tebd, fidelity_to_classical, g2_zero, init_state, integrate,
    mean_field, non_gaussianity, photon_number, steady_density_matrix, steady_field, steady_g2, steady_photon_number,
    steady_wigner, wigner_displaced_parity, Complex64, Error, FockDensityMatrix, SystemParams,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Config, InitialSection, Method, Tolerances};
use crate::output::{float, Manifest, OutDir, Table};

/// Relative tolerance on the Wigner normalization of every emitted frame.
pub const FRAME_NORMALIZATION_TOL: f64 = 1e-2;

#[derive(Debug)]
pub enum CliError {
    Config(Vec<String>),
    Numerical(String),
    Tolerance(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Tolerance(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(errs) => {
                writeln!(f, "configuration has {} problem(s):", errs.len())?;
                for e in errs {
                    writeln!(f, "  - {e}")?;
                }
                Ok(())
            }
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Tolerance(m) => write!(f, "tolerance check failed: {m}"),
            CliError::Io(m) => write!(f, "output error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub struct Context<'a> {
    pub config: &'a Config,
    pub raw: &'a str,
    pub out: Option<&'a Path>,
    pub seedless: bool,
}

impl Context<'_> {
    fn manifest(&self, command: &str) -> Manifest {
        let mut m = Manifest::new(command, self.config, self.raw);
        m.seedless = self.seedless;
        m.warnings.extend(self.config.params().warnings());
        m
    }

    fn out_dir(&self, command: &str) -> Result<OutDir, CliError> {
        let root = self
            .out
            .ok_or_else(|| CliError::Config(vec![format!("{command} needs --out DIR")]))?;
        Ok(OutDir::create(root, self.manifest(command))?)
    }
}

/// Observables reported for one density matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub field: Complex64,
    pub photon_number: f64,
    pub g2: f64,
    pub fidelity: f64,
    pub non_gaussianity: f64,
}

impl Metrics {
    /// `g2` and `non_gaussianity` are NaN where they are undefined.
    pub fn of(rho: &FockDensityMatrix) -> Self {
        Self {
            field: mean_field(rho),
            photon_number: photon_number(rho),
            g2: g2_zero(rho).unwrap_or(f64::NAN),
            fidelity: fidelity_to_classical(rho),
            non_gaussianity: non_gaussianity(rho).unwrap_or(f64::NAN),
        }
    }

    /// Closed-form values for a coherent state.
    pub fn coherent(alpha: Complex64) -> Self {
        Self {
            field: alpha,
            photon_number: alpha.norm_sqr(),
            g2: 1.0,
            fidelity: 1.0,
            non_gaussianity: 0.0,
        }
    }
}

/// One recorded time of a trajectory.
pub struct Sample {
    pub t: f64,
    pub rho: FockDensityMatrix,
    pub trunc_error: f64,
}

pub struct Trajectory {
    pub method: Method,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn trunc_error(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.trunc_error)
    }

    /// Sample closest to `t`.
    pub fn at(&self, t: f64) -> &Sample {
        self.samples
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .expect("trajectory has the initial sample")
    }
}

pub fn tebd_trajectory(params: &SystemParams, config: &Config, initial: &InitialSection) -> Result<Trajectory, Error> {
    let chain = build_chain(params, config.tebd.n_sites)?;
    let gates = build_gates(params, &chain, &config.tebd)?;
    let mut state = init_state(&config.tebd, &initial.state())?;
    let snaps = run_tebd(&mut state, &gates, &config.tebd, |_| {})?;
    Ok(Trajectory {
        method: Method::Tebd,
        samples: snaps
            .into_iter()
            .map(|s| Sample {
                t: s.t,
                rho: s.rho,
                trunc_error: s.trunc_error,
            })
            .collect(),
    })
}

pub fn lindblad_trajectory(params: &SystemParams, config: &Config, initial: &InitialSection) -> Result<Trajectory, Error> {
    let lc = config.lindblad_config();
    let rho0 = FockDensityMatrix::coherent(initial.state().alpha(), lc.dim);
    let traj = integrate(&rho0, params, &lc)?;
    Ok(Trajectory {
        method: Method::Lindblad,
        samples: traj
            .samples
            .into_iter()
            .map(|s| Sample {
                t: s.t,
                rho: s.rho,
                trunc_error: 0.0,
            })
            .collect(),
    })
}

fn run_method(method: Method, params: &SystemParams, config: &Config) -> Result<Trajectory, Error> {
    match method {
        Method::Tebd => tebd_trajectory(params, config, &config.initial),
        Method::Lindblad => lindblad_trajectory(params, config, &config.initial),
    }
}

pub const TRAJECTORY_HEADER: [&str; 9] = [
    "method",
    "t",
    "re_alpha",
    "im_alpha",
    "n",
    "g2",
    "fidelity",
    "non_gaussianity",
    "trunc_error",
];

fn push_trajectory(table: &mut Table, traj: &Trajectory) {
    for s in &traj.samples {
        let m = Metrics::of(&s.rho);
        table.push(vec![
            traj.method.name().to_string(),
            float(s.t),
            float(m.field.re),
            float(m.field.im),
            float(m.photon_number),
            float(m.g2),
            float(m.fidelity),
            float(m.non_gaussianity),
            float(s.trunc_error),
        ]);
    }
}

pub fn frame_name(t: f64) -> String {
    format!("frame_t{t:09.4}")
}

/// `evolve`: trajectory CSV plus Wigner frames at the configured times.
pub fn evolve(ctx: &Context) -> Result<Manifest, CliError> {
    let start = Instant::now();
    let config = ctx.config;
    let mut out = ctx.out_dir("evolve")?;
    let params = config.params();
    let traj = run_method(config.method, &params, config)?;

    let mut table = Table::new(TRAJECTORY_HEADER);
    push_trajectory(&mut table, &traj);
    out.table("trajectory.csv", &table)?;

    let frames: Vec<&Sample> = config.frames.times.iter().map(|t| traj.at(*t)).collect();
    let n_max = frames.iter().map(|s| photon_number(&s.rho)).fold(0.0, f64::max);
    let spec = config.frames.grid.spec(n_max);
    let grids = frames
        .par_iter()
        .map(|s| {
            wigner_displaced_parity(&s.rho, &spec).map(|mut g| {
                g.time = Some(s.t);
                g
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    for (t, grid) in config.frames.times.iter().zip(&grids) {
        let name = frame_name(*t);
        let deficit = grid.normalization_deficit();
        if deficit > FRAME_NORMALIZATION_TOL {
            out.manifest
                .warnings
                .push(format!("{name}: Wigner normalization off by {deficit:.3e}"));
        }
        if grid.support_warning {
            out.manifest.warnings.push(format!("{name}: grid clips the state's support"));
        }
        out.text(&format!("frames/{name}.csv"), &grid_csv(grid))?;
        out.text(&format!("frames/{name}.json"), &grid.sidecar_json())?;
    }

    out.manifest.trunc_error = traj.trunc_error();
    out.manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(out.finish()?)
}

fn grid_csv(grid: &kerr_tebd::WignerGrid) -> String {
    let mut s = String::new();
    for ip in 0..grid.spec.np {
        let row: Vec<String> = (0..grid.spec.nx).map(|ix| float(grid.value(ix, ip))).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn sweep_header(states: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "E",
        "re_alpha",
        "im_alpha",
        "abs_alpha",
        "n",
        "g2",
        "fidelity",
        "non_gaussianity",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for k in 0..states {
        for col in ["re_alpha", "im_alpha", "n", "g2", "trunc_error"] {
            h.push(format!("tebd{k}_{col}"));
        }
    }
    h
}

enum SweepJob {
    Analytic(usize),
    Tebd(usize, usize),
}

enum SweepResult {
    Analytic(Vec<String>),
    Tebd(Vec<String>, f64),
}

fn analytic_row(params: &SystemParams) -> Result<Vec<String>, Error> {
    let field = steady_field(params)?;
    let n = steady_photon_number(params)?;
    let g2 = match steady_g2(params) {
        Ok(g) => g,
        Err(Error::UndefinedG2(_)) => f64::NAN,
        Err(e) => return Err(e),
    };
    let rho = steady_density_matrix(params, analytic::steady_dimension(params)?)?;
    let m = Metrics::of(&rho);
    Ok(vec![
        float(params.drive.re),
        float(field.re),
        float(field.im),
        float(field.norm()),
        float(n),
        float(g2),
        float(m.fidelity),
        float(m.non_gaussianity),
    ])
}

/// `steady-sweep`: analytic steady state over the drive grid, optional TEBD
/// end states per initial state, and analytic Wigner maps.
pub fn steady_sweep(ctx: &Context) -> Result<Manifest, CliError> {
    let start = Instant::now();
    let config = ctx.config;
    if config.sweep.drives.is_empty() {
        return Err(CliError::Config(vec!["sweep.drives: must list at least one drive".into()]));
    }
    let mut out = ctx.out_dir("steady-sweep")?;
    let drives = &config.sweep.drives;
    let states = &config.sweep.tebd_initial_states;

    let mut jobs = Vec::new();
    for i in 0..drives.len() {
        jobs.push(SweepJob::Analytic(i));
        for k in 0..states.len() {
            jobs.push(SweepJob::Tebd(i, k));
        }
    }
    let results = jobs
        .par_iter()
        .map(|job| -> Result<SweepResult, Error> {
            match *job {
                SweepJob::Analytic(i) => {
                    analytic_row(&config.params_with_drive(Complex64::new(drives[i], 0.0))).map(SweepResult::Analytic)
                }
                SweepJob::Tebd(i, k) => {
                    let params = config.params_with_drive(Complex64::new(drives[i], 0.0));
                    let traj = tebd_trajectory(&params, config, &states[k])?;
                    let last = traj.samples.last().expect("trajectory has the initial sample");
                    let m = Metrics::of(&last.rho);
                    Ok(SweepResult::Tebd(
                        vec![
                            float(m.field.re),
                            float(m.field.im),
                            float(m.photon_number),
                            float(m.g2),
                            float(last.trunc_error),
                        ],
                        last.trunc_error,
                    ))
                }
            }
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut table = Table::new(sweep_header(states.len()));
    let mut row = Vec::new();
    let mut trunc: f64 = 0.0;
    for r in results {
        match r {
            SweepResult::Analytic(cols) => {
                if !row.is_empty() {
                    table.push(std::mem::take(&mut row));
                }
                row = cols;
            }
            SweepResult::Tebd(cols, e) => {
                row.extend(cols);
                trunc = trunc.max(e);
            }
        }
    }
    table.push(row);
    out.table("sweep.csv", &table)?;

    let grids = config
        .sweep
        .wigner_drives
        .par_iter()
        .map(|e| {
            let params = config.params_with_drive(Complex64::new(*e, 0.0));
            let n = steady_photon_number(&params)?;
            steady_wigner(&params, &config.sweep.grid.spec(n))
        })
        .collect::<Result<Vec<_>, _>>()?;
    for (e, grid) in config.sweep.wigner_drives.iter().zip(&grids) {
        let name = format!("wigner_E{e:08.4}");
        if grid.support_warning {
            out.manifest.warnings.push(format!("{name}: grid clips the state's support"));
        }
        out.text(&format!("wigner/{name}.csv"), &grid_csv(grid))?;
        out.text(&format!("wigner/{name}.json"), &grid.sidecar_json())?;
    }

    out.manifest.trunc_error = trunc;
    out.manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(out.finish()?)
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Deviations {
    pub field: Option<f64>,
    pub photon_number: Option<f64>,
    pub g2: Option<f64>,
    pub non_gaussianity: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairReport {
    pub pair: String,
    pub deviations: Deviations,
    pub passes: BTreeMap<String, bool>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub reference: String,
    pub tolerances: Tolerances,
    pub methods: BTreeMap<String, String>,
    pub pairs: Vec<PairReport>,
    pub pass: bool,
}

/// Largest deviation between paired metrics. Points where either side is
/// undefined are skipped; with `relative` the result is scaled by the largest
/// reference magnitude. g² and non-Gaussianity are always compared absolutely.
fn max_deviation(pairs: &[(Metrics, Metrics)], pick: fn(&Metrics) -> Complex64, relative: bool) -> Option<f64> {
    let mut worst: Option<f64> = None;
    let mut scale: f64 = 0.0;
    for (a, b) in pairs {
        let (x, y) = (pick(a), pick(b));
        if !(x.re.is_finite() && x.im.is_finite() && y.re.is_finite() && y.im.is_finite()) {
            continue;
        }
        let d = (x - y).norm();
        worst = Some(worst.map_or(d, |w| w.max(d)));
        scale = scale.max(y.norm());
    }
    if relative {
        worst.map(|w| match (scale > 0.0, w == 0.0) {
            (true, _) => w / scale,
            (false, true) => 0.0,
            (false, false) => f64::INFINITY,
        })
    } else {
        worst
    }
}

fn pair_report(name: &str, pairs: Option<Vec<(Metrics, Metrics)>>, tol: &Tolerances) -> PairReport {
    let deviations = match pairs {
        Some(p) => Deviations {
            field: max_deviation(&p, |m| m.field, tol.relative),
            photon_number: max_deviation(&p, |m| Complex64::new(m.photon_number, 0.0), tol.relative),
            g2: max_deviation(&p, |m| Complex64::new(m.g2, 0.0), false),
            non_gaussianity: max_deviation(&p, |m| Complex64::new(m.non_gaussianity, 0.0), false),
        },
        None => Deviations::default(),
    };
    let mut passes = BTreeMap::new();
    for (key, dev, limit) in [
        ("field", deviations.field, tol.field),
        ("photon_number", deviations.photon_number, tol.photon_number),
        ("g2", deviations.g2, tol.g2),
        ("non_gaussianity", deviations.non_gaussianity, tol.non_gaussianity),
    ] {
        passes.insert(key.to_string(), dev.is_some_and(|d| d < limit));
    }
    PairReport {
        pair: name.to_string(),
        pass: passes.values().all(|p| *p),
        deviations,
        passes,
    }
}

/// Markov closed form `α(t) = α₀e^{−kt} + E(1 − e^{−kt})/k`, `k = γ/2 + iΔ`.
pub fn linear_closed_form(params: &SystemParams, alpha0: Complex64, t: f64) -> Complex64 {
    let k = Complex64::new(params.gamma / 2.0, params.delta);
    let decay = (-k * t).exp();
    alpha0 * decay + params.drive * (Complex64::new(1.0, 0.0) - decay) / k
}

fn status<T>(r: &Result<T, Error>) -> String {
    match r {
        Ok(_) => "ok".to_string(),
        Err(e) => format!("error: {e}"),
    }
}

/// `compare`: TEBD, Lindblad and an analytic reference on one parameter
/// point. The reference is the closed-form trajectory without Kerr term and
/// the exact steady state otherwise.
pub fn compare(ctx: &Context) -> Result<(Manifest, CompareReport), CliError> {
    let start = Instant::now();
    let config = ctx.config;
    let mut out = ctx.out_dir("compare")?;
    let params = config.params();

    let (tebd, lindblad) = rayon::join(
        || tebd_trajectory(&params, config, &config.initial),
        || lindblad_trajectory(&params, config, &config.initial),
    );
    let linear = params.chi2 == 0.0;
    let reference: Result<Metrics, Error> = if linear {
        Ok(Metrics::coherent(Complex64::new(0.0, 0.0)))
    } else {
        steady_density_matrix(&params, analytic::steady_dimension(&params).unwrap_or(0))
            .map(|rho| {
                let mut m = Metrics::of(&rho);
                // moments straight from the series where they are available
                if let Ok(g) = steady_g2(&params) {
                    m.g2 = g;
                }
                m
            })
            .and_then(|m| Ok(Metrics { field: steady_field(&params)?, photon_number: steady_photon_number(&params)?, ..m }))
    };

    let mut methods = BTreeMap::new();
    let mut failed = Vec::new();
    methods.insert("tebd".to_string(), status(&tebd));
    methods.insert("lindblad".to_string(), status(&lindblad));
    methods.insert("reference".to_string(), status(&reference));
    for (name, s) in &methods {
        if s != "ok" {
            failed.push(format!("{name}: {s}"));
        }
    }

    let tebd = tebd.ok();
    let lindblad = lindblad.ok();
    let reference = reference.ok();
    let alpha0 = config.initial.state().alpha();

    let versus_reference = |traj: &Option<Trajectory>| -> Option<Vec<(Metrics, Metrics)>> {
        let traj = traj.as_ref()?;
        let reference = reference?;
        if linear {
            Some(
                traj.samples
                    .iter()
                    .map(|s| (Metrics::of(&s.rho), Metrics::coherent(linear_closed_form(&params, alpha0, s.t))))
                    .collect(),
            )
        } else {
            let last = traj.samples.last()?;
            Some(vec![(Metrics::of(&last.rho), reference)])
        }
    };
    let between = match (&tebd, &lindblad) {
        (Some(a), Some(b)) => Some(
            a.samples
                .iter()
                .zip(&b.samples)
                .map(|(x, y)| (Metrics::of(&x.rho), Metrics::of(&y.rho)))
                .collect(),
        ),
        _ => None,
    };
    let tol = &config.tolerances;
    let pairs = vec![
        pair_report("tebd_vs_lindblad", between, tol),
        pair_report("tebd_vs_reference", versus_reference(&tebd), tol),
        pair_report("lindblad_vs_reference", versus_reference(&lindblad), tol),
    ];
    let report = CompareReport {
        reference: if linear { "closed_form" } else { "analytic_steady_state" }.to_string(),
        tolerances: *tol,
        methods,
        pass: pairs.iter().all(|p| p.pass),
        pairs,
    };

    let mut table = Table::new(TRAJECTORY_HEADER);
    for traj in [&tebd, &lindblad].into_iter().flatten() {
        push_trajectory(&mut table, traj);
    }
    out.table("trajectory.csv", &table)?;
    out.text("report.json", &serde_json::to_string_pretty(&report).expect("report serializes"))?;
    out.manifest.trunc_error = tebd.as_ref().map_or(0.0, |t| t.trunc_error());
    out.manifest.convergence.insert("pass".into(), report.pass);
    out.manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    let manifest = out.finish()?;

    if !failed.is_empty() {
        return Err(CliError::Numerical(failed.join("; ")));
    }
    if !report.pass {
        let failing: Vec<&str> = report.pairs.iter().filter(|p| !p.pass).map(|p| p.pair.as_str()).collect();
        return Err(CliError::Tolerance(failing.join(", ")));
    }
    Ok((manifest, report))
}

#[derive(Debug, Serialize)]
pub struct ChainInfo {
    pub n_sites: usize,
    pub eta_sys: f64,
    pub site_freqs: Vec<f64>,
    pub hoppings: Vec<f64>,
    pub group_velocity: f64,
    pub recurrence_time: f64,
}

/// `chain-info`: chain coefficients as JSON on stdout, and in `--out` if given.
pub fn chain_info(ctx: &Context) -> Result<String, CliError> {
    let params = ctx.config.params();
    let chain = build_chain(&params, ctx.config.tebd.n_sites)?;
    let info = ChainInfo {
        n_sites: chain.n_sites(),
        eta_sys: chain.eta_sys,
        group_velocity: chain.group_velocity(&params),
        recurrence_time: chain.recurrence_time(&params),
        site_freqs: chain.site_freqs,
        hoppings: chain.hoppings,
    };
    let json = serde_json::to_string_pretty(&info).expect("chain info serializes");
    if ctx.out.is_some() {
        let mut out = ctx.out_dir("chain-info")?;
        out.text("chain.json", &json)?;
        out.finish()?;
    }
    Ok(json)
}
