//! Physical parameters, run configuration, and the mean-field steady state.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of the driven Kerr oscillator and its reservoir.
///
/// All entries are in units of `g`. The drive enters the rotating-frame
/// Hamiltonian as `H_S = Δ a†a + χ″ a†²a² + i(E a† − E* a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Detuning `Δ = ω_S − ω_L`.
    pub delta: f64,
    /// Kerr anharmonicity `χ″`.
    pub chi2: f64,
    /// Energy decay rate `γ = 2π c₀²`.
    pub gamma: f64,
    /// Complex drive amplitude `E`.
    pub drive: Complex64,
    /// Hard cutoff of the flat reservoir band, `ω_c = g·x_max`.
    pub cutoff: f64,
}

impl SystemParams {
    pub fn new(delta: f64, chi2: f64, gamma: f64, drive: Complex64, cutoff: f64) -> Result<Self> {
        let params = Self {
            delta,
            chi2,
            gamma,
            drive,
            cutoff,
        };
        params.validate()?;
        Ok(params)
    }

    /// Parameter set of the reference figures: `Δ=−12, χ″=1.5, γ=6.28, ω_c=60`.
    pub fn reference(drive: f64) -> Self {
        Self {
            delta: -12.0,
            chi2: 1.5,
            gamma: 6.28,
            drive: Complex64::new(drive, 0.0),
            cutoff: 60.0,
        }
    }

    pub fn with_drive(mut self, drive: Complex64) -> Self {
        self.drive = drive;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.delta, self.chi2, self.gamma, self.cutoff, self.drive.re, self.drive.im]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("all parameters must be finite".into()));
        }
        if self.gamma <= 0.0 {
            return Err(Error::InvalidParameter(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if self.cutoff <= 0.0 {
            return Err(Error::InvalidParameter(format!("cutoff must be > 0, got {}", self.cutoff)));
        }
        Ok(())
    }

    /// Non-fatal conditions worth reporting to the user.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.cutoff < 5.0 * self.gamma {
            out.push(format!(
                "cutoff {} is below 5·gamma = {}; the chain bath is far from the wide-band limit",
                self.cutoff,
                5.0 * self.gamma
            ));
        }
        if self.chi2 == 0.0 {
            out.push("chi2 = 0: linear cavity (validation mode)".into());
        }
        out
    }

    pub fn drive_magnitude(&self) -> f64 {
        self.drive.norm()
    }

    pub fn drive_phase(&self) -> f64 {
        self.drive.arg()
    }

    /// `c₀` recovered from `γ = 2π c₀²`.
    pub fn coupling_density(&self) -> f64 {
        (self.gamma / (2.0 * PI)).sqrt()
    }
}

/// Coherent initial state of the system mode, `|amplitude·e^{i·phase}⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub amplitude: f64,
    pub phase: f64,
}

impl InitialState {
    pub fn new(amplitude: f64, phase: f64) -> Result<Self> {
        if !(amplitude.is_finite() && phase.is_finite()) || amplitude < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "initial amplitude must be finite and >= 0, got {amplitude}"
            )));
        }
        Ok(Self {
            amplitude,
            phase: fold_phase(phase),
        })
    }

    pub fn vacuum() -> Self {
        Self {
            amplitude: 0.0,
            phase: 0.0,
        }
    }

    pub fn alpha(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase)
    }
}

/// Folds an angle into `(−π, π]`.
pub fn fold_phase(phase: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut p = phase % two_pi;
    if p <= -PI {
        p += two_pi;
    } else if p > PI {
        p -= two_pi;
    }
    p
}

/// Chain length, truncations and time stepping of a TEBD run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Total chain length including the system site.
    pub n_sites: usize,
    /// Fock truncation `M` of the system site.
    pub local_dim: usize,
    /// Fock truncation of each bath site; `None` means `local_dim`.
    pub bath_local_dim: Option<usize>,
    /// Maximum Schmidt rank `χ`.
    pub bond_dim: usize,
    pub dt: f64,
    pub t_total: f64,
    pub snapshot_stride: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_sites: 61,
            local_dim: 20,
            bath_local_dim: None,
            bond_dim: 36,
            dt: 1e-2,
            t_total: 2.0,
            snapshot_stride: 1,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_sites < 2 {
            problems.push(format!("n_sites must be >= 2, got {}", self.n_sites));
        }
        if self.local_dim < 2 {
            problems.push(format!("local_dim must be >= 2, got {}", self.local_dim));
        }
        if let Some(d) = self.bath_local_dim {
            if d < 2 {
                problems.push(format!("bath_local_dim must be >= 2, got {d}"));
            }
        }
        if self.bond_dim < 1 {
            problems.push("bond_dim must be >= 1".to_string());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            problems.push(format!("dt must be > 0, got {}", self.dt));
        }
        // t_total = 0 is accepted as a single-snapshot run.
        if !(self.t_total == 0.0 || self.t_total >= self.dt) || !self.t_total.is_finite() {
            problems.push(format!("t_total must be 0 or >= dt, got {}", self.t_total));
        }
        if self.snapshot_stride < 1 {
            problems.push("snapshot_stride must be >= 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(problems.join("; ")))
        }
    }

    pub fn bath_dim(&self) -> usize {
        self.bath_local_dim.unwrap_or(self.local_dim)
    }

    /// Physical dimension of chain site `site`.
    pub fn site_dim(&self, site: usize) -> usize {
        if site == 0 {
            self.local_dim
        } else {
            self.bath_dim()
        }
    }

    pub fn n_steps(&self) -> usize {
        if self.t_total == 0.0 {
            0
        } else {
            (self.t_total / self.dt - 1e-9).ceil() as usize
        }
    }
}

/// Drive intensity `|E|²` that holds the mean field at photon number `n`:
/// `|E|² = n·((Δ + 2χ″n)² + γ²/4)`.
pub fn semiclassical_drive_for_field(params: &SystemParams, n: f64) -> f64 {
    let detuned = params.delta + 2.0 * params.chi2 * n;
    n * (detuned * detuned + 0.25 * params.gamma * params.gamma)
}

/// Non-negative real photon numbers solving
/// `4χ″²n³ + 4Δχ″n² + (Δ² + γ²/4)n − |E|² = 0`, ascending.
///
/// A double root at tangency is reported once.
pub fn semiclassical_branches(params: &SystemParams, drive_sq: f64) -> Vec<f64> {
    let (delta, chi, gamma) = (params.delta, params.chi2, params.gamma);
    let linear = delta * delta + 0.25 * gamma * gamma;
    if drive_sq <= 0.0 {
        return vec![0.0];
    }
    if chi == 0.0 {
        return vec![drive_sq / linear];
    }
    let a3 = 4.0 * chi * chi;
    let coeffs = [a3, 4.0 * delta * chi, linear, -drive_sq];
    let mut roots = cubic_real_roots(delta / chi, linear / a3, -drive_sq / a3);
    for r in roots.iter_mut() {
        *r = newton_polish(&coeffs, *r);
    }
    roots.retain(|r| *r >= -1e-12);
    for r in roots.iter_mut() {
        *r = r.max(0.0);
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs().max(1.0));
    roots
}

const TANGENCY_TOL: f64 = 1e-8;

/// Real roots of the monic cubic `x³ + b x² + c x + d`.
fn cubic_real_roots(b: f64, c: f64, d: f64) -> Vec<f64> {
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    // disc > 0: three distinct real roots.
    let t1 = 4.0 * p * p * p;
    let t2 = 27.0 * q * q;
    let disc = -(t1 + t2);
    let scale = t1.abs().max(t2).max(f64::MIN_POSITIVE);
    if disc.abs() <= TANGENCY_TOL * scale {
        if p.abs() <= f64::EPSILON * (1.0 + c.abs() + b * b) {
            return vec![-shift];
        }
        let simple = 3.0 * q / p;
        let double = -1.5 * q / p;
        return vec![simple - shift, double - shift];
    }
    if disc > 0.0 {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (theta - 2.0 * PI * k as f64 / 3.0).cos() - shift)
            .collect()
    } else {
        let s = (q * q / 4.0 + p * p * p / 27.0).sqrt();
        let u = (-q / 2.0 + s).cbrt();
        let v = (-q / 2.0 - s).cbrt();
        vec![u + v - shift]
    }
}

fn newton_polish(coeffs: &[f64; 4], mut x: f64) -> f64 {
    for _ in 0..8 {
        let f = ((coeffs[0] * x + coeffs[1]) * x + coeffs[2]) * x + coeffs[3];
        let df = (3.0 * coeffs[0] * x + 2.0 * coeffs[1]) * x + coeffs[2];
        if df == 0.0 {
            break;
        }
        let step = f / df;
        if !step.is_finite() {
            break;
        }
        x -= step;
        if step.abs() <= 1e-15 * x.abs().max(1e-300) {
            break;
        }
    }
    x
}

/// Classical bistability requires `Δ < −γ√3/2`.
pub fn is_bistable(params: &SystemParams) -> bool {
    params.delta < -params.gamma * 3f64.sqrt() / 2.0
}

/// Photon numbers at the two semiclassical turning points (upper end of the
/// lower branch, lower end of the upper branch), if the model is bistable.
pub fn turning_points(params: &SystemParams) -> Option<(f64, f64)> {
    if !is_bistable(params) || params.chi2 <= 0.0 {
        return None;
    }
    let root = (params.delta * params.delta - 0.75 * params.gamma * params.gamma).sqrt();
    let lower = (-2.0 * params.delta - root) / (6.0 * params.chi2);
    let upper = (-2.0 * params.delta + root) / (6.0 * params.chi2);
    Some((lower, upper))
}

/// Drive magnitudes `|E|` bounding the three-root interval, ascending.
pub fn bistable_drive_interval(params: &SystemParams) -> Option<(f64, f64)> {
    let (n_lower, n_upper) = turning_points(params)?;
    let e_a = semiclassical_drive_for_field(params, n_upper).sqrt();
    let e_b = semiclassical_drive_for_field(params, n_lower).sqrt();
    Some((e_a.min(e_b), e_a.max(e_b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper() -> SystemParams {
        SystemParams::reference(0.0)
    }

    #[test]
    fn zero_field_needs_zero_drive() {
        assert_eq!(semiclassical_drive_for_field(&paper(), 0.0), 0.0);
    }

    #[test]
    fn drive_for_field_at_bracket_zero() {
        let v = semiclassical_drive_for_field(&paper(), 4.0);
        assert!((v - 39.4384).abs() < 1e-12);
    }

    #[test]
    fn drive_for_field_exact_decimal() {
        // (−12 + 3)² + 6.28²/4 = 81 + 9.8596, all exact in decimal arithmetic
        let v = semiclassical_drive_for_field(&paper(), 1.0);
        assert!((v - 90.8596).abs() < 1e-12);
    }

    #[test]
    fn undriven_root() {
        assert_eq!(semiclassical_branches(&paper(), 0.0), vec![0.0]);
    }

    fn sign_change_count(params: &SystemParams, drive_sq: f64) -> usize {
        let f = |n: f64| semiclassical_drive_for_field(params, n) - drive_sq;
        let mut count = 0;
        let mut prev = f(0.0);
        let mut n = 1e-4;
        while n <= 20.0 {
            let cur = f(n);
            if prev.signum() != cur.signum() {
                count += 1;
            }
            prev = cur;
            n += 1e-4;
        }
        count
    }

    #[test]
    fn three_roots_at_e8_one_at_e20() {
        let p = paper();
        assert_eq!(sign_change_count(&p, 64.0), 3);
        assert_eq!(semiclassical_branches(&p, 64.0).len(), 3);
        assert_eq!(sign_change_count(&p, 400.0), 1);
        assert_eq!(semiclassical_branches(&p, 400.0).len(), 1);
    }

    #[test]
    fn bistability_condition() {
        assert!(is_bistable(&paper()));
        let mut p = paper();
        p.delta = 0.0;
        assert!(!is_bistable(&p));
        p.delta = -p.gamma * 3f64.sqrt() / 2.0;
        assert!(!is_bistable(&p));
    }

    #[test]
    fn tangency_reports_double_root_once() {
        let p = paper();
        let (n_lo, _) = turning_points(&p).unwrap();
        let roots = semiclassical_branches(&p, semiclassical_drive_for_field(&p, n_lo));
        assert_eq!(roots.len(), 2, "{roots:?}");
        assert!(roots.iter().any(|r| (r - n_lo).abs() < 1e-4));
    }

    #[test]
    fn linear_cavity_single_root() {
        let mut p = paper();
        p.chi2 = 0.0;
        let roots = semiclassical_branches(&p, 4.0);
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - 4.0 / (144.0 + 9.8596)).abs() < 1e-15);
    }

    #[test]
    fn phase_folding() {
        assert!((fold_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((fold_phase(-PI) - PI).abs() < 1e-12);
        assert!((fold_phase(-0.37 * PI) + 0.37 * PI).abs() < 1e-12);
        assert!(InitialState::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SimulationConfig::default().validate().is_ok());
        let cfg = SimulationConfig {
            n_sites: 1,
            dt: 0.0,
            ..Default::default()
        };
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("n_sites") && msg.contains("dt"));
        assert_eq!(SimulationConfig::default().n_steps(), 200);
        let zero = SimulationConfig {
            t_total: 0.0,
            ..Default::default()
        };
        assert_eq!(zero.n_steps(), 0);
    }

    #[test]
    fn params_validation_and_warnings() {
        assert!(SystemParams::new(-12.0, 1.5, 0.0, Complex64::new(1.0, 0.0), 60.0).is_err());
        assert!(SystemParams::new(-12.0, 1.5, 6.28, Complex64::new(1.0, 0.0), -1.0).is_err());
        let p = SystemParams::new(-12.0, 1.5, 6.28, Complex64::new(1.0, 0.0), 20.0).unwrap();
        assert_eq!(p.warnings().len(), 1);
        assert!((paper().coupling_density() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn bistable_interval_brackets_e8() {
        let (lo, hi) = bistable_drive_interval(&paper()).unwrap();
        assert!(lo < 8.0 && 8.0 < hi && hi < 10.0, "{lo} {hi}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn roundtrip_field_drive_field(n in 0.0f64..25.0) {
                let p = paper();
                let roots = semiclassical_branches(&p, semiclassical_drive_for_field(&p, n));
                prop_assert!(
                    roots.iter().any(|r| (r - n).abs() <= 1e-6 * n.max(1e-6)),
                    "n = {} roots = {:?}", n, roots
                );
            }

            #[test]
            fn roundtrip_arbitrary_params(
                n in 0.0f64..10.0,
                delta in -20.0f64..20.0,
                chi in 0.1f64..3.0,
                gamma in 0.5f64..10.0,
            ) {
                let p = SystemParams { delta, chi2: chi, gamma, drive: Complex64::new(0.0, 0.0), cutoff: 60.0 };
                let roots = semiclassical_branches(&p, semiclassical_drive_for_field(&p, n));
                prop_assert!(roots.iter().any(|r| (r - n).abs() <= 1e-6 * n.max(1e-6)));
            }
        }
    }

    #[test]
    fn three_root_interval_exists_iff_bistable() {
        let scan = |p: &SystemParams| {
            (0..400).any(|k| {
                let drive_sq = 10f64.powf(-2.0 + 6.0 * k as f64 / 399.0);
                semiclassical_branches(p, drive_sq).len() == 3
            })
        };
        for delta in [-20.0, -12.0, -6.0, -5.0, 0.0, 4.0] {
            let mut p = paper();
            p.delta = delta;
            assert_eq!(scan(&p), is_bistable(&p), "delta = {delta}");
        }
    }
}
