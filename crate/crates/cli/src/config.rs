//! Run configuration: a single JSON document with an explicit schema version.
//!
//! Every section is optional and falls back to the reference setup. Unknown
//! keys, wrong types and out-of-range values are collected in one pass so a
//! broken file reports all of its problems at once.

use std::sync::LazyLock;

use kerr_tebd::{Complex64, GridSpec, InitialState, LindbladConfig, SimulationConfig, SystemParams};
use serde::Serialize;
use serde_json::{Map, Value};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemSection {
    pub delta: f64,
    pub chi2: f64,
    pub gamma: f64,
    pub cutoff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitialSection {
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LindbladSection {
    pub dim: usize,
    pub dt: f64,
}

/// Phase-space window; `half_width = None` sizes the window from the state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSection {
    pub half_width: Option<f64>,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FramesSection {
    pub times: Vec<f64>,
    pub grid: GridSection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSection {
    pub drives: Vec<f64>,
    pub tebd_initial_states: Vec<InitialSection>,
    pub wigner_drives: Vec<f64>,
    pub grid: GridSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub field: f64,
    pub photon_number: f64,
    pub g2: f64,
    pub non_gaussianity: f64,
    /// Divide the field and photon-number deviations by the largest magnitude
    /// of the reference quantity.
    pub relative: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tebd,
    Lindblad,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Tebd => "tebd",
            Method::Lindblad => "lindblad",
        }
    }
}

/// Fully resolved configuration. Serializing it yields a document that
/// parses back to the same value, which is what the manifest records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub schema_version: u64,
    pub system: SystemSection,
    pub drive: [f64; 2],
    pub initial: InitialSection,
    pub tebd: SimulationConfig,
    pub lindblad: LindbladSection,
    pub method: Method,
    pub frames: FramesSection,
    pub sweep: SweepSection,
    pub tolerances: Tolerances,
}

impl Config {
    pub fn params(&self) -> SystemParams {
        self.params_with_drive(Complex64::new(self.drive[0], self.drive[1]))
    }

    pub fn params_with_drive(&self, drive: Complex64) -> SystemParams {
        SystemParams {
            delta: self.system.delta,
            chi2: self.system.chi2,
            gamma: self.system.gamma,
            drive,
            cutoff: self.system.cutoff,
        }
    }

    pub fn initial_state(&self) -> InitialState {
        self.initial.state()
    }

    /// Time between trajectory rows.
    pub fn output_interval(&self) -> f64 {
        self.tebd.dt * self.tebd.snapshot_stride as f64
    }

    /// Lindblad settings whose samples land on the TEBD snapshot times.
    pub fn lindblad_config(&self) -> LindbladConfig {
        let ratio = (self.tebd.dt / self.lindblad.dt).round() as usize;
        LindbladConfig {
            dim: self.lindblad.dim,
            dt: self.lindblad.dt,
            t_total: self.tebd.t_total,
            sample_stride: ratio * self.tebd.snapshot_stride,
        }
    }

    /// Snapshot index closest to `t`.
    pub fn snapshot_index(&self, t: f64) -> usize {
        (t / self.output_interval()).round() as usize
    }
}

impl InitialSection {
    pub fn state(&self) -> InitialState {
        InitialState::new(self.amplitude, self.phase).expect("validated at load time")
    }
}

impl GridSection {
    /// Grid for a state with photon number `n_max`.
    pub fn spec(&self, n_max: f64) -> GridSpec {
        match self.half_width {
            Some(w) => GridSpec::square(w, self.points),
            None => GridSpec::for_photon_number(n_max, self.points),
        }
    }
}

pub fn parse(text: &str) -> Result<Config, Vec<String>> {
    let value: Value = serde_json::from_str(text).map_err(|e| vec![format!("config is not valid JSON: {e}")])?;
    let mut c = Checker::default();
    let config = c.config(&value);
    if c.errors.is_empty() {
        Ok(config)
    } else {
        Err(c.errors)
    }
}

#[derive(Default)]
struct Checker {
    errors: Vec<String>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

fn non_negative(x: f64) -> bool {
    x >= 0.0 && x.is_finite()
}

fn finite(x: f64) -> bool {
    x.is_finite()
}

static EMPTY: LazyLock<Map<String, Value>> = LazyLock::new(Map::new);

impl Checker {
    fn fail(&mut self, msg: String) {
        self.errors.push(msg);
    }

    /// Object at `path`, reporting keys outside `allowed`.
    fn object<'a>(&mut self, v: Option<&'a Value>, path: &str, allowed: &[&str]) -> &'a Map<String, Value> {
        match v {
            None | Some(Value::Null) => &EMPTY,
            Some(Value::Object(map)) => {
                for key in map.keys() {
                    if !allowed.contains(&key.as_str()) {
                        self.fail(format!("{}: unknown key", join(path, key)));
                    }
                }
                map
            }
            Some(_) => {
                self.fail(format!("{path}: expected an object"));
                &EMPTY
            }
        }
    }

    fn number(&mut self, obj: &Map<String, Value>, path: &str, key: &str, default: f64, ok: fn(f64) -> bool, rule: &str) -> f64 {
        let at = join(path, key);
        match obj.get(key) {
            None => default,
            Some(v) => match v.as_f64() {
                Some(x) if ok(x) => x,
                Some(x) => {
                    self.fail(format!("{at}: {x} is out of range ({rule})"));
                    default
                }
                None => {
                    self.fail(format!("{at}: expected a number"));
                    default
                }
            },
        }
    }

    fn count(&mut self, obj: &Map<String, Value>, path: &str, key: &str, default: usize, min: usize) -> usize {
        let at = join(path, key);
        match obj.get(key) {
            None => default,
            Some(v) => match v.as_u64() {
                Some(x) if x as usize >= min => x as usize,
                Some(x) => {
                    self.fail(format!("{at}: {x} is out of range (must be >= {min})"));
                    default
                }
                None => {
                    self.fail(format!("{at}: expected a non-negative integer"));
                    default
                }
            },
        }
    }

    fn numbers(&mut self, obj: &Map<String, Value>, path: &str, key: &str, ok: fn(f64) -> bool, rule: &str) -> Vec<f64> {
        let at = join(path, key);
        match obj.get(key) {
            None => Vec::new(),
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    match item.as_f64() {
                        Some(x) if ok(x) => out.push(x),
                        Some(x) => self.fail(format!("{at}[{i}]: {x} is out of range ({rule})")),
                        None => self.fail(format!("{at}[{i}]: expected a number")),
                    }
                }
                out
            }
            Some(_) => {
                self.fail(format!("{at}: expected an array of numbers"));
                Vec::new()
            }
        }
    }

    fn config(&mut self, root: &Value) -> Config {
        let top = self.object(
            Some(root),
            "",
            &[
                "schema_version",
                "system",
                "drive",
                "initial",
                "tebd",
                "lindblad",
                "method",
                "frames",
                "sweep",
                "tolerances",
            ],
        );
        match top.get("schema_version") {
            Some(v) if v.as_u64() == Some(SCHEMA_VERSION) => {}
            Some(v) => self.fail(format!("schema_version: unsupported version {v}, expected {SCHEMA_VERSION}")),
            None => self.fail("schema_version: missing".to_string()),
        }

        let system = self.system(top.get("system"));
        let drive = self.drive(top.get("drive"));
        let initial = self.initial(top.get("initial"), "initial");
        let tebd = self.tebd(top.get("tebd"));
        let lindblad = self.lindblad(top.get("lindblad"), &tebd);
        let method = match top.get("method") {
            None => Method::Tebd,
            Some(Value::String(s)) if s == "tebd" => Method::Tebd,
            Some(Value::String(s)) if s == "lindblad" => Method::Lindblad,
            Some(v) => {
                self.fail(format!("method: expected \"tebd\" or \"lindblad\", got {v}"));
                Method::Tebd
            }
        };
        let frames = self.frames(top.get("frames"), &tebd);
        let sweep = self.sweep(top.get("sweep"));
        let tolerances = self.tolerances(top.get("tolerances"));

        let config = Config {
            schema_version: SCHEMA_VERSION,
            system,
            drive,
            initial,
            tebd,
            lindblad,
            method,
            frames,
            sweep,
            tolerances,
        };
        if let Err(e) = config.params().validate() {
            self.fail(format!("system: {e}"));
        }
        if let Err(e) = config.tebd.validate() {
            self.fail(format!("tebd: {e}"));
        }
        config
    }

    fn system(&mut self, v: Option<&Value>) -> SystemSection {
        let r = SystemParams::reference(0.0);
        let obj = self.object(v, "system", &["delta", "chi2", "gamma", "cutoff"]);
        SystemSection {
            delta: self.number(obj, "system", "delta", r.delta, finite, "finite"),
            chi2: self.number(obj, "system", "chi2", r.chi2, non_negative, ">= 0"),
            gamma: self.number(obj, "system", "gamma", r.gamma, positive, "> 0"),
            cutoff: self.number(obj, "system", "cutoff", r.cutoff, positive, "> 0"),
        }
    }

    fn drive(&mut self, v: Option<&Value>) -> [f64; 2] {
        match v {
            None => [1.0, 0.0],
            Some(Value::Number(n)) => match n.as_f64() {
                Some(x) if x.is_finite() => [x, 0.0],
                _ => {
                    self.fail("drive: expected a finite number".to_string());
                    [1.0, 0.0]
                }
            },
            Some(Value::Array(items)) if items.len() == 2 => {
                match (items[0].as_f64(), items[1].as_f64()) {
                    (Some(re), Some(im)) if re.is_finite() && im.is_finite() => [re, im],
                    _ => {
                        self.fail("drive: expected [re, im] with finite numbers".to_string());
                        [1.0, 0.0]
                    }
                }
            }
            Some(_) => {
                self.fail("drive: expected a number or [re, im]".to_string());
                [1.0, 0.0]
            }
        }
    }

    fn initial(&mut self, v: Option<&Value>, path: &str) -> InitialSection {
        let obj = self.object(v, path, &["amplitude", "phase"]);
        InitialSection {
            amplitude: self.number(obj, path, "amplitude", 0.0, non_negative, ">= 0"),
            phase: self.number(obj, path, "phase", 0.0, finite, "finite"),
        }
    }

    fn tebd(&mut self, v: Option<&Value>) -> SimulationConfig {
        let d = SimulationConfig::default();
        let p = "tebd";
        let obj = self.object(
            v,
            p,
            &["n_sites", "local_dim", "bath_local_dim", "bond_dim", "dt", "t_total", "snapshot_stride"],
        );
        let bath_local_dim = match obj.get("bath_local_dim") {
            None | Some(Value::Null) => None,
            Some(_) => Some(self.count(obj, p, "bath_local_dim", 2, 2)),
        };
        SimulationConfig {
            n_sites: self.count(obj, p, "n_sites", d.n_sites, 2),
            local_dim: self.count(obj, p, "local_dim", d.local_dim, 2),
            bath_local_dim,
            bond_dim: self.count(obj, p, "bond_dim", d.bond_dim, 1),
            dt: self.number(obj, p, "dt", d.dt, positive, "> 0"),
            t_total: self.number(obj, p, "t_total", d.t_total, non_negative, ">= 0"),
            snapshot_stride: self.count(obj, p, "snapshot_stride", d.snapshot_stride, 1),
        }
    }

    fn lindblad(&mut self, v: Option<&Value>, tebd: &SimulationConfig) -> LindbladSection {
        let d = LindbladConfig::default();
        let obj = self.object(v, "lindblad", &["dim", "dt"]);
        let section = LindbladSection {
            dim: self.count(obj, "lindblad", "dim", d.dim, 2),
            dt: self.number(obj, "lindblad", "dt", d.dt, positive, "> 0"),
        };
        let ratio = tebd.dt / section.dt;
        if tebd.dt > 0.0 && ((ratio - ratio.round()).abs() > 1e-9 * ratio || ratio.round() < 1.0) {
            self.fail(format!(
                "lindblad.dt: {} must divide tebd.dt = {} so both methods sample the same times",
                section.dt, tebd.dt
            ));
        }
        section
    }

    fn grid(&mut self, v: Option<&Value>, path: &str) -> GridSection {
        let obj = self.object(v, path, &["half_width", "points"]);
        let half_width = match obj.get("half_width") {
            None | Some(Value::Null) => None,
            Some(_) => Some(self.number(obj, path, "half_width", 1.0, positive, "> 0")),
        };
        GridSection {
            half_width,
            points: self.count(obj, path, "points", 101, 3),
        }
    }

    fn frames(&mut self, v: Option<&Value>, tebd: &SimulationConfig) -> FramesSection {
        let obj = self.object(v, "frames", &["times", "grid"]);
        let times = self.numbers(obj, "frames", "times", non_negative, ">= 0");
        let interval = tebd.dt * tebd.snapshot_stride as f64;
        for (i, t) in times.iter().enumerate() {
            if *t > tebd.t_total + 1e-9 {
                self.fail(format!("frames.times[{i}]: {t} lies beyond tebd.t_total = {}", tebd.t_total));
            } else if interval > 0.0 {
                let k = (t / interval).round();
                if (k * interval - t).abs() > 1e-9 * interval.max(1.0) && (*t - tebd.t_total).abs() > 1e-9 {
                    self.fail(format!("frames.times[{i}]: {t} is not a multiple of the output interval {interval}"));
                }
            }
        }
        FramesSection {
            times,
            grid: self.grid(obj.get("grid"), "frames.grid"),
        }
    }

    fn sweep(&mut self, v: Option<&Value>) -> SweepSection {
        let p = "sweep";
        let obj = self.object(v, p, &["drives", "tebd_initial_states", "wigner_drives", "grid"]);
        let mut states = Vec::new();
        match obj.get("tebd_initial_states") {
            None => {}
            Some(Value::Array(items)) => {
                for (i, item) in items.iter().enumerate() {
                    states.push(self.initial(Some(item), &format!("sweep.tebd_initial_states[{i}]")));
                }
            }
            Some(_) => self.fail("sweep.tebd_initial_states: expected an array".to_string()),
        }
        SweepSection {
            drives: self.numbers(obj, p, "drives", non_negative, ">= 0"),
            tebd_initial_states: states,
            wigner_drives: self.numbers(obj, p, "wigner_drives", non_negative, ">= 0"),
            grid: self.grid(obj.get("grid"), "sweep.grid"),
        }
    }

    fn tolerances(&mut self, v: Option<&Value>) -> Tolerances {
        let p = "tolerances";
        let obj = self.object(v, p, &["field", "photon_number", "g2", "non_gaussianity", "relative"]);
        let relative = match obj.get("relative") {
            None => false,
            Some(Value::Bool(b)) => *b,
            Some(_) => {
                self.fail("tolerances.relative: expected a boolean".to_string());
                false
            }
        };
        Tolerances {
            field: self.number(obj, p, "field", 0.05, non_negative, ">= 0"),
            photon_number: self.number(obj, p, "photon_number", 0.05, non_negative, ">= 0"),
            g2: self.number(obj, p, "g2", 0.05, non_negative, ">= 0"),
            non_gaussianity: self.number(obj, p, "non_gaussianity", 0.05, non_negative, ">= 0"),
            relative,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_takes_reference_defaults() {
        let c = parse(r#"{"schema_version": 1}"#).unwrap();
        assert_eq!(c.system.delta, -12.0);
        assert_eq!(c.system.gamma, 6.28);
        assert_eq!(c.tebd, SimulationConfig::default());
        assert_eq!(c.method, Method::Tebd);
        assert_eq!(c.lindblad_config().sample_stride, 10);
    }

    #[test]
    fn every_problem_is_reported() {
        let text = r#"{
            "schema_version": 2,
            "sytem": {},
            "system": {"gamma": -1, "kappa": 3},
            "tebd": {"dt": "fast", "bond_dim": 0},
            "method": "euler"
        }"#;
        let errs = parse(text).unwrap_err();
        let joined = errs.join("\n");
        for needle in ["schema_version", "sytem: unknown key", "system.gamma", "system.kappa", "tebd.dt", "tebd.bond_dim", "method"] {
            assert!(joined.contains(needle), "missing {needle} in\n{joined}");
        }
        assert!(errs.len() >= 7);
    }

    #[test]
    fn resolved_config_round_trips() {
        let text = r#"{"schema_version": 1, "drive": [3.5, 0.25], "initial": {"amplitude": 2.5, "phase": -1.1623892818282235},
            "tebd": {"bath_local_dim": 6, "t_total": 0.5, "snapshot_stride": 5}, "frames": {"times": [0.1, 0.5]},
            "sweep": {"drives": [1, 8], "tebd_initial_states": [{"amplitude": 1.5}]}}"#;
        let c = parse(text).unwrap();
        let again = parse(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again);
        assert_eq!(again.tebd.bath_local_dim, Some(6));
    }

    #[test]
    fn frame_times_must_sit_on_the_output_grid() {
        let errs = parse(r#"{"schema_version": 1, "tebd": {"snapshot_stride": 10}, "frames": {"times": [0.15, 3.0]}}"#).unwrap_err();
        assert_eq!(errs.len(), 2, "{errs:?}");
    }

    #[test]
    fn lindblad_step_must_divide_tebd_step() {
        assert!(parse(r#"{"schema_version": 1, "lindblad": {"dt": 0.003}}"#).is_err());
        assert!(parse(r#"{"schema_version": 1, "lindblad": {"dt": 0.002}}"#).is_ok());
    }

    #[test]
    fn invalid_json_is_a_single_error() {
        assert_eq!(parse("{").unwrap_err().len(), 1);
    }
}
