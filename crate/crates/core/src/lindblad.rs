//! Zero-temperature master equation of the driven Kerr oscillator in a
//! truncated Fock basis, integrated with fixed-step RK4.
//!
//! `dρ/dt = −i[H_S, ρ] + γ(aρa† − ½{a†a, ρ})`, with
//! `H_S = Δa†a + χ″a†²a² + i(Ea† − E*a)`.

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::observables::FockDensityMatrix;

pub const METHOD: &str = "lindblad";

const TRACE_DRIFT: f64 = 1e-12;
const POSITIVITY_FLOOR: f64 = -1e-6;
const STEADY_RESIDUAL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LindbladConfig {
    /// Fock truncation.
    pub dim: usize,
    pub dt: f64,
    pub t_total: f64,
    /// Record every `sample_stride`-th step (the initial and final states are
    /// always recorded).
    pub sample_stride: usize,
}

impl Default for LindbladConfig {
    fn default() -> Self {
        Self {
            dim: 30,
            dt: 1e-3,
            t_total: 2.0,
            sample_stride: 10,
        }
    }
}

impl LindbladConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.dim < 2 {
            problems.push(format!("dim must be >= 2, got {}", self.dim));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            problems.push(format!("dt must be > 0, got {}", self.dt));
        }
        if !(self.t_total >= 0.0 && self.t_total.is_finite()) {
            problems.push(format!("t_total must be >= 0, got {}", self.t_total));
        }
        if self.sample_stride < 1 {
            problems.push("sample_stride must be >= 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(problems.join("; ")))
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

/// Row-major dense work array with the matrix dimension.
#[derive(Clone)]
struct Dense {
    dim: usize,
    data: Vec<Complex64>,
}

impl Dense {
    fn from_mat(m: &Mat<Complex64>) -> Self {
        let dim = m.nrows();
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(m[(i, j)]);
            }
        }
        Self { dim, data }
    }

    fn to_mat(&self) -> Mat<Complex64> {
        Mat::from_fn(self.dim, self.dim, |i, j| self.data[i * self.dim + j])
    }

    fn axpy(&self, s: f64, other: &Dense) -> Dense {
        Dense {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b * s).collect(),
        }
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    fn hermitize(&mut self) {
        let d = self.dim;
        for i in 0..d {
            self.data[i * d + i].im = 0.0;
            for j in i + 1..d {
                let avg = 0.5 * (self.data[i * d + j] + self.data[j * d + i].conj());
                self.data[i * d + j] = avg;
                self.data[j * d + i] = avg.conj();
            }
        }
    }
}

/// Precomputed coefficients of the structured right-hand side.
struct Generator {
    dim: usize,
    energy: Vec<f64>,
    sqrt: Vec<f64>,
    drive: Complex64,
    gamma: f64,
}

impl Generator {
    fn new(params: &SystemParams, dim: usize) -> Self {
        let energy = (0..dim)
            .map(|n| {
                let n = n as f64;
                params.delta * n + params.chi2 * n * (n - 1.0)
            })
            .collect();
        Self {
            dim,
            energy,
            sqrt: (0..=dim).map(|n| (n as f64).sqrt()).collect(),
            drive: params.drive,
            gamma: params.gamma,
        }
    }

    fn apply(&self, rho: &Dense) -> Dense {
        let d = self.dim;
        let r = |i: usize, j: usize| rho.data[i * d + j];
        let e = self.drive;
        let ec = e.conj();
        let mi = Complex64::new(0.0, -1.0);
        let mut out = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for j in 0..d {
                let rij = r(i, j);
                let mut v = mi * (self.energy[i] - self.energy[j]) * rij;
                // E(a†ρ − ρa†) − E*(aρ − ρa)
                if i > 0 {
                    v += e * self.sqrt[i] * r(i - 1, j);
                }
                if j + 1 < d {
                    v -= e * self.sqrt[j + 1] * r(i, j + 1);
                }
                if i + 1 < d {
                    v -= ec * self.sqrt[i + 1] * r(i + 1, j);
                }
                if j > 0 {
                    v += ec * self.sqrt[j] * r(i, j - 1);
                }
                if i + 1 < d && j + 1 < d {
                    v += self.gamma * self.sqrt[i + 1] * self.sqrt[j + 1] * r(i + 1, j + 1);
                }
                v -= 0.5 * self.gamma * (i + j) as f64 * rij;
                out[i * d + j] = v;
            }
        }
        Dense { dim: d, data: out }
    }

    fn rk4(&self, rho: &Dense, k1: &Dense, dt: f64) -> Dense {
        let k2 = self.apply(&rho.axpy(0.5 * dt, k1));
        let k3 = self.apply(&rho.axpy(0.5 * dt, &k2));
        let k4 = self.apply(&rho.axpy(dt, &k3));
        let mut next = rho.clone();
        for idx in 0..next.data.len() {
            next.data[idx] += (k1.data[idx] + 2.0 * k2.data[idx] + 2.0 * k3.data[idx] + k4.data[idx]) * (dt / 6.0);
        }
        next
    }
}

/// `dρ/dt` of the master equation.
pub fn lindblad_rhs(rho: &Mat<Complex64>, params: &SystemParams) -> Mat<Complex64> {
    Generator::new(params, rho.nrows()).apply(&Dense::from_mat(rho)).to_mat()
}

#[derive(Debug, Clone)]
pub struct LindbladSample {
    pub t: f64,
    pub rho: FockDensityMatrix,
}

#[derive(Debug, Clone)]
pub struct LindbladTrajectory {
    pub samples: Vec<LindbladSample>,
    /// Largest trace drift removed by renormalization in a single step.
    pub max_trace_drift: f64,
}

impl LindbladTrajectory {
    pub fn final_state(&self) -> &FockDensityMatrix {
        &self.samples.last().expect("trajectory has the initial sample").rho
    }
}

fn to_density(rho: &Dense) -> Result<FockDensityMatrix> {
    FockDensityMatrix::new_unchecked(rho.to_mat())
}

/// One RK4 step with Hermitization, trace renormalization and a positivity
/// gate. Returns the new state and the trace drift that was removed.
fn guarded_step(gen: &Generator, rho: &Dense, k1: &Dense, dt: f64, t_next: f64) -> Result<(Dense, f64)> {
    let mut next = gen.rk4(rho, k1, dt);
    next.hermitize();
    let tr = next.trace().re;
    let drift = (tr - 1.0).abs();
    if drift > TRACE_DRIFT {
        for z in next.data.iter_mut() {
            *z /= tr;
        }
    }
    let min = to_density(&next)?.min_eigenvalue()?;
    if min < POSITIVITY_FLOOR {
        return Err(Error::PositivityLost {
            time: t_next,
            min_eigenvalue: min,
        });
    }
    Ok((next, drift))
}

/// Integrates from `rho0`; calls `observe(t, ρ)` on every recorded sample.
pub fn integrate_with<F>(
    rho0: &FockDensityMatrix,
    params: &SystemParams,
    config: &LindbladConfig,
    mut observe: F,
) -> Result<LindbladTrajectory>
where
    F: FnMut(f64, &FockDensityMatrix),
{
    config.validate()?;
    params.validate()?;
    if rho0.dim() != config.dim {
        return Err(Error::InvalidParameter(format!(
            "initial state has dimension {} but the integrator uses {}",
            rho0.dim(),
            config.dim
        )));
    }
    rho0.check()?;
    let gen = Generator::new(params, config.dim);
    let mut rho = Dense::from_mat(rho0.entries());
    let n_steps = config.n_steps();
    let mut samples = vec![LindbladSample {
        t: 0.0,
        rho: rho0.clone(),
    }];
    observe(0.0, rho0);
    let mut max_drift: f64 = 0.0;
    for step in 1..=n_steps {
        let t = (step as f64 * config.dt).min(config.t_total);
        let h = t - (step - 1) as f64 * config.dt;
        let k1 = gen.apply(&rho);
        let (next, drift) = guarded_step(&gen, &rho, &k1, h, t)?;
        max_drift = max_drift.max(drift);
        rho = next;
        if step % config.sample_stride == 0 || step == n_steps {
            let state = to_density(&rho)?;
            observe(t, &state);
            samples.push(LindbladSample { t, rho: state });
        }
    }
    Ok(LindbladTrajectory {
        samples,
        max_trace_drift: max_drift,
    })
}

pub fn integrate(rho0: &FockDensityMatrix, params: &SystemParams, config: &LindbladConfig) -> Result<LindbladTrajectory> {
    integrate_with(rho0, params, config, |_, _| {})
}

#[derive(Debug, Clone)]
pub struct LongTimeState {
    pub rho: FockDensityMatrix,
    /// Whether `max |dρ/dt|` fell below `10⁻⁹` before the horizon.
    pub converged: bool,
    pub t_reached: f64,
    pub residual: f64,
}

/// Integrates from vacuum until `max |dρ/dt| < 10⁻⁹` or `t > 50/γ`.
/// `config.t_total` is ignored.
pub fn steady_state_longtime(params: &SystemParams, config: &LindbladConfig) -> Result<LongTimeState> {
    steady_state_longtime_with_horizon(params, config, 50.0 / params.gamma)
}

pub fn steady_state_longtime_with_horizon(
    params: &SystemParams,
    config: &LindbladConfig,
    horizon: f64,
) -> Result<LongTimeState> {
    config.validate()?;
    params.validate()?;
    let gen = Generator::new(params, config.dim);
    let mut rho = Dense::from_mat(FockDensityMatrix::vacuum(config.dim).entries());
    let mut t = 0.0;
    let mut step = 0usize;
    loop {
        let k1 = gen.apply(&rho);
        let residual = k1.max_abs();
        if residual < STEADY_RESIDUAL || t > horizon {
            return Ok(LongTimeState {
                rho: to_density(&rho)?,
                converged: residual < STEADY_RESIDUAL,
                t_reached: t,
                residual,
            });
        }
        step += 1;
        let t_next = step as f64 * config.dt;
        rho = guarded_step(&gen, &rho, &k1, config.dt, t_next)?.0;
        t = t_next;
    }
}
