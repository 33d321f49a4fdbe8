//! Diagnostics of a single-mode Fock-basis density matrix.
//!
//! Quadrature convention: `x = (a + a†)/√2`, `p = (a − a†)/(i√2)`, so the
//! vacuum covariance is `½·1` and the symplectic eigenvalue of a thermal
//! state with occupation `n̄` is `ν = 2n̄ + 1`. Entropies are in nats.
//!
//! Phase-space grids are laid out over `α = x + ip` with `x = Re α` and
//! `p = Im α`, normalized so that `∫ W d²α = 1`.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock;
use crate::linalg::{self, c};

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-8;
const EIGEN_FLOOR: f64 = -1e-9;

/// `M×M` Hermitian, unit-trace, positive semidefinite density matrix.
#[derive(Debug, Clone)]
pub struct FockDensityMatrix {
    entries: Mat<Complex64>,
}

impl FockDensityMatrix {
    /// Validates Hermiticity, trace and positivity.
    pub fn new(entries: Mat<Complex64>) -> Result<Self> {
        let rho = Self::new_unchecked(entries)?;
        rho.check()?;
        Ok(rho)
    }

    /// Accepts any square matrix; call [`check`](Self::check) to validate.
    pub fn new_unchecked(entries: Mat<Complex64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::InvalidDensityMatrix(format!(
                "expected a non-empty square matrix, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self { entries })
    }

    pub fn check(&self) -> Result<()> {
        let herm = linalg::hermiticity_defect(&self.entries);
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr} differs from 1")));
        }
        let min = self.min_eigenvalue()?;
        if min < EIGEN_FLOOR {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    pub fn from_pure(state: &[Complex64]) -> Result<Self> {
        let n = state.len();
        Self::new(Mat::from_fn(n, n, |i, j| state[i] * state[j].conj()))
    }

    pub fn vacuum(dim: usize) -> Self {
        Self::fock(0, dim)
    }

    pub fn fock(n: usize, dim: usize) -> Self {
        assert!(n < dim, "Fock level {n} outside truncation {dim}");
        Self {
            entries: Mat::from_fn(dim, dim, |i, j| if i == n && j == n { c(1.0, 0.0) } else { c(0.0, 0.0) }),
        }
    }

    /// Truncated coherent state, renormalized at `dim`.
    pub fn coherent(alpha: Complex64, dim: usize) -> Self {
        let v = fock::coherent_state(alpha, dim);
        Self {
            entries: Mat::from_fn(dim, dim, |i, j| v[i] * v[j].conj()),
        }
    }

    /// Geometric thermal distribution, renormalized at `dim`.
    pub fn thermal(n_mean: f64, dim: usize) -> Self {
        let ratio = n_mean / (1.0 + n_mean);
        let weights: Vec<f64> = (0..dim).map(|k| ratio.powi(k as i32)).collect();
        let z: f64 = weights.iter().sum();
        Self {
            entries: Mat::from_fn(dim, dim, |i, j| if i == j { c(weights[i] / z, 0.0) } else { c(0.0, 0.0) }),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Mat<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> Mat<Complex64> {
        self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.entries[(i, i)]).sum()
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        linalg::eigvalsh(&self.entries)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// `⟨a†ᵐ aⁿ⟩`.
    pub fn normal_moment(&self, m: usize, n: usize) -> Complex64 {
        // Tr[a†ᵐ aⁿ ρ] = Σ_k ⟨k| a†ᵐ aⁿ ρ |k⟩ = Σ_j c_j ρ_{j+n−m.., k}
        let dim = self.dim();
        let mut acc = c(0.0, 0.0);
        for k in 0..dim {
            // aⁿ|j⟩ with j = k + n − m ... written via ⟨k|a†ᵐ = √(k!/(k−m)!) ⟨k−m|
            if k < m {
                continue;
            }
            let base = k - m;
            let j = base + n;
            if j >= dim {
                continue;
            }
            let mut coeff = 1.0;
            for l in 0..m {
                coeff *= ((k - l) as f64).sqrt();
            }
            for l in 0..n {
                coeff *= ((j - l) as f64).sqrt();
            }
            acc += self.entries[(j, k)] * coeff;
        }
        acc
    }

    /// `e^{−iθa†a} ρ e^{iθa†a}`.
    pub fn rotated(&self, theta: f64) -> Self {
        let n = self.dim();
        Self {
            entries: Mat::from_fn(n, n, |i, j| {
                self.entries[(i, j)] * Complex64::from_polar(1.0, -theta * (i as f64 - j as f64))
            }),
        }
    }

    /// Embeds the state into a larger truncation.
    pub fn padded(&self, dim: usize) -> Self {
        let n = self.dim();
        Self {
            entries: Mat::from_fn(dim, dim, |i, j| if i < n && j < n { self.entries[(i, j)] } else { c(0.0, 0.0) }),
        }
    }

    /// Mixture `Σ wᵢ ρᵢ` of equal-dimension states.
    pub fn mixture(parts: &[(f64, &FockDensityMatrix)]) -> Result<Self> {
        let dim = parts
            .first()
            .ok_or_else(|| Error::InvalidDensityMatrix("empty mixture".into()))?
            .1
            .dim();
        let mut acc = Mat::<Complex64>::zeros(dim, dim);
        for (w, rho) in parts {
            if rho.dim() != dim {
                return Err(Error::InvalidDensityMatrix("mixture dimension mismatch".into()));
            }
            acc += linalg::scaled(rho.entries(), c(*w, 0.0));
        }
        Self::new(acc)
    }

    pub fn entropy(&self) -> Result<f64> {
        Ok(self
            .eigenvalues()?
            .into_iter()
            .map(|l| l.max(0.0))
            .filter(|l| *l > 0.0)
            .map(|l| -l * l.ln())
            .sum())
    }
}

/// `Tr[aρ]`.
pub fn mean_field(rho: &FockDensityMatrix) -> Complex64 {
    rho.normal_moment(0, 1)
}

pub fn photon_number(rho: &FockDensityMatrix) -> f64 {
    rho.normal_moment(1, 1).re
}

/// `⟨a†a†aa⟩ / ⟨a†a⟩²`.
pub fn g2_zero(rho: &FockDensityMatrix) -> Result<f64> {
    let n = photon_number(rho);
    if n <= 1e-12 {
        return Err(Error::UndefinedG2(n));
    }
    Ok(rho.normal_moment(2, 2).re / (n * n))
}

/// Overlap `⟨α_cl|ρ|α_cl⟩` with the coherent state at the state's own mean
/// field, truncated and renormalized at the state's dimension.
pub fn fidelity_to_classical(rho: &FockDensityMatrix) -> f64 {
    let alpha = mean_field(rho);
    let v = fock::coherent_state(alpha, rho.dim());
    let e = rho.entries();
    let mut acc = c(0.0, 0.0);
    for i in 0..rho.dim() {
        for j in 0..rho.dim() {
            acc += v[i].conj() * e[(i, j)] * v[j];
        }
    }
    acc.re
}

/// First and second moments defining the moment-matched Gaussian state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMoments {
    /// `⟨a⟩`
    pub mean: Complex64,
    /// `⟨a†a⟩`
    pub n_mean: f64,
    /// `⟨a²⟩`
    pub anomalous: Complex64,
}

impl GaussianMoments {
    /// `⟨Δa†Δa⟩`
    pub fn fluctuation_number(&self) -> f64 {
        self.n_mean - self.mean.norm_sqr()
    }

    /// `⟨Δa²⟩`
    pub fn fluctuation_anomalous(&self) -> Complex64 {
        self.anomalous - self.mean * self.mean
    }

    /// Symmetrized quadrature covariance `σ_ij = ½⟨{Δr_i, Δr_j}⟩`.
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let n = self.fluctuation_number();
        let m = self.fluctuation_anomalous();
        [[0.5 + n + m.re, m.im], [m.im, 0.5 + n - m.re]]
    }

    /// `ν = 2√det σ`; one for pure Gaussian states.
    pub fn symplectic_eigenvalue(&self) -> f64 {
        let s = self.covariance();
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        2.0 * det.max(0.0).sqrt()
    }

    /// Thermal occupation of the Gaussian after removing displacement and
    /// squeezing.
    pub fn effective_occupation(&self) -> f64 {
        0.5 * (self.symplectic_eigenvalue() - 1.0)
    }

    /// Von Neumann entropy of the Gaussian state with these moments.
    pub fn gaussian_entropy(&self) -> f64 {
        let nu = self.symplectic_eigenvalue().max(1.0);
        let plus = 0.5 * (nu + 1.0);
        let minus = 0.5 * (nu - 1.0);
        let xlogx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
        xlogx(plus) - xlogx(minus)
    }
}

pub fn closest_gaussian_moments(rho: &FockDensityMatrix) -> Result<GaussianMoments> {
    let moments = GaussianMoments {
        mean: mean_field(rho),
        n_mean: photon_number(rho),
        anomalous: rho.normal_moment(0, 2),
    };
    let nu = moments.symplectic_eigenvalue();
    if nu < 1.0 - 1e-6 {
        return Err(Error::UnphysicalCovariance(nu));
    }
    Ok(moments)
}

/// Relative entropy to the moment-matched Gaussian, `S(ρ_G) − S(ρ)`, in nats.
pub fn non_gaussianity(rho: &FockDensityMatrix) -> Result<f64> {
    let moments = closest_gaussian_moments(rho)?;
    Ok(moments.gaussian_entropy() - rho.entropy()?)
}

/// Rectangular sampling of phase space over `α = x + ip`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub nx: usize,
    pub np: usize,
}

impl GridSpec {
    pub fn square(half_width: f64, n: usize) -> Self {
        Self {
            x_min: -half_width,
            x_max: half_width,
            p_min: -half_width,
            p_max: half_width,
            nx: n,
            np: n,
        }
    }

    /// Square grid reaching `√n_max + 3` in every direction.
    pub fn for_photon_number(n_max: f64, n: usize) -> Self {
        Self::square(n_max.max(0.0).sqrt() + 3.0, n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.np < 2 || !(self.x_max > self.x_min) || !(self.p_max > self.p_min) {
            return Err(Error::InvalidParameter(format!("degenerate phase-space grid {self:?}")));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / (self.np - 1) as f64
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.x_min + ix as f64 * self.dx()
    }

    pub fn p(&self, ip: usize) -> f64 {
        self.p_min + ip as f64 * self.dp()
    }

    pub fn point(&self, ix: usize, ip: usize) -> Complex64 {
        c(self.x(ix), self.p(ip))
    }

    /// Whether the disc of radius `radius` around `center` lies inside.
    pub fn contains_disc(&self, center: Complex64, radius: f64) -> bool {
        center.re - radius >= self.x_min
            && center.re + radius <= self.x_max
            && center.im - radius >= self.p_min
            && center.im + radius <= self.p_max
    }
}

/// Sampled quasiprobability, row-major with `np` rows (p) and `nx` columns (x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    /// Evolution time of the sampled state, if any.
    pub time: Option<f64>,
    /// Set when the state's support may extend past the grid.
    pub support_warning: bool,
    /// Points evaluated through a fallback path.
    pub fallback_points: usize,
}

#[derive(Debug, Serialize)]
struct WignerSidecar<'a> {
    x_range: [f64; 2],
    p_range: [f64; 2],
    nx: usize,
    np: usize,
    time: Option<f64>,
    normalization_deficit: f64,
    support_warning: bool,
    fallback_points: usize,
    layout: &'a str,
}

impl WignerGrid {
    pub fn value(&self, ix: usize, ip: usize) -> f64 {
        self.values[ip * self.spec.nx + ix]
    }

    /// `Σ W Δx Δp`
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.dx() * self.spec.dp()
    }

    pub fn normalization_deficit(&self) -> f64 {
        1.0 - self.integral()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Strict interior local maxima (8-neighbourhood) above `threshold`,
    /// as `(ix, ip, value)` sorted by descending value.
    pub fn local_maxima(&self, threshold: f64) -> Vec<(usize, usize, f64)> {
        let (nx, np) = (self.spec.nx, self.spec.np);
        let mut out = Vec::new();
        for ip in 1..np - 1 {
            for ix in 1..nx - 1 {
                let v = self.value(ix, ip);
                if v < threshold {
                    continue;
                }
                let mut is_max = true;
                'scan: for dp in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dp == 0 && dx == 0 {
                            continue;
                        }
                        let w = self.value((ix as i64 + dx) as usize, (ip as i64 + dp) as usize);
                        if w > v || (w == v && (dp, dx) < (0, 0)) {
                            is_max = false;
                            break 'scan;
                        }
                    }
                }
                if is_max {
                    out.push((ix, ip, v));
                }
            }
        }
        out.sort_by(|a, b| b.2.total_cmp(&a.2));
        out
    }

    /// Writes the value matrix as CSV (one row per `p`, 17 significant digits).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for ip in 0..self.spec.np {
            let row: Vec<String> = (0..self.spec.nx).map(|ix| format!("{:.16e}", self.value(ix, ip))).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    /// JSON metadata describing the CSV written by [`write_csv`](Self::write_csv).
    pub fn sidecar_json(&self) -> String {
        let sidecar = WignerSidecar {
            x_range: [self.spec.x_min, self.spec.x_max],
            p_range: [self.spec.p_min, self.spec.p_max],
            nx: self.spec.nx,
            np: self.spec.np,
            time: self.time,
            normalization_deficit: self.normalization_deficit(),
            support_warning: self.support_warning,
            fallback_points: self.fallback_points,
            layout: "rows: p ascending (Im alpha); columns: x ascending (Re alpha)",
        };
        serde_json::to_string_pretty(&sidecar).expect("sidecar serializes")
    }

    pub fn write_sidecar(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.sidecar_json())?;
        Ok(())
    }
}

/// Extra Fock levels kept beyond the state's truncation when displacing.
pub const DISPLACEMENT_PADDING: usize = 8;

fn padded_rows(dim: usize, alpha: Complex64) -> usize {
    let reach = alpha.norm() + (dim as f64).sqrt() + 6.0;
    (dim + DISPLACEMENT_PADDING).max((reach * reach).ceil() as usize)
}

/// `W(α) = (2/π) Tr[D(−α) ρ D(α) Π]` with parity `Π = (−1)^{a†a}`.
pub fn wigner_at(rho: &FockDensityMatrix, alpha: Complex64) -> f64 {
    let dim = rho.dim();
    let rows = padded_rows(dim, alpha);
    let v = fock::displaced_number_states(-alpha, dim, rows);
    let vr = &v * rho.entries();
    let mut acc = 0.0;
    for k in 0..rows {
        let mut diag = c(0.0, 0.0);
        for n in 0..dim {
            diag += vr[(k, n)] * v[(k, n)].conj();
        }
        if k % 2 == 0 {
            acc += diag.re;
        } else {
            acc -= diag.re;
        }
    }
    2.0 / PI * acc
}

/// Whether `⟨n⟩ + 3√Var(n)` fits inside the grid around the mean field.
pub fn grid_covers_support(rho: &FockDensityMatrix, spec: &GridSpec) -> bool {
    let n = photon_number(rho);
    let n2 = rho.normal_moment(2, 2).re + n;
    let var = (n2 - n * n).max(0.0);
    let radius = (n + 3.0 * var.sqrt()).sqrt();
    spec.contains_disc(c(0.0, 0.0), radius)
}

pub fn wigner_displaced_parity(rho: &FockDensityMatrix, spec: &GridSpec) -> Result<WignerGrid> {
    spec.validate()?;
    let values: Vec<f64> = (0..spec.np)
        .into_par_iter()
        .flat_map_iter(|ip| (0..spec.nx).map(move |ix| wigner_at(rho, spec.point(ix, ip))).collect::<Vec<_>>())
        .collect();
    Ok(WignerGrid {
        spec: *spec,
        values,
        time: None,
        support_warning: !grid_covers_support(rho, spec),
        fallback_points: 0,
    })
}
