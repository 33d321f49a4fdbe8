//! Exact steady state of the driven Kerr oscillator.
//!
//! The normally ordered moments `G^(m,n) = ⟨a†ᵐ aⁿ⟩` have the closed form
//!
//! ```text
//! G^(m,n) = (−1)^m w^{m+n} F(p+n, q+m, z) / ((p)_n (q)_m F(p, q, z))
//! w = E/(iχ″),  p = Δ/χ″ − iγ/(2χ″),  q = p*,  z = 2(E/χ″)²
//! ```
//!
//! where `F` is `₀F₂` and `(x)_n` the rising factorial. The sign factor makes
//! the linear-response limit `⟨a⟩ → E/(iΔ + γ/2)` agree with the Lindblad
//! equation `d⟨a⟩/dt = (−iΔ − γ/2)⟨a⟩ + E`.
//!
//! Density matrix and Wigner function are alternating sums over the moment
//! table whose terms exceed the result by many orders of magnitude, so the
//! table and those sums are held in multi-precision arithmetic.

use std::f64::consts::PI;
use std::sync::OnceLock;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use rug::{Complex, Float};

use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::observables::{self, FockDensityMatrix, GridSpec, WignerGrid};

/// Working precision of the `₀F₂` series, about 38 decimal digits.
pub const SERIES_PRECISION: u32 = 128;
/// Working precision of moment tables and the sums built on them.
pub const TABLE_PRECISION: u32 = 192;

const SERIES_TERM_CAP: usize = 100_000;
const SERIES_RELATIVE_FLOOR: f64 = 1e-35;
const SERIES_QUIET_TERMS: usize = 50;

const RHO_RELATIVE_FLOOR: f64 = 1e-14;
const RHO_ABSOLUTE_FLOOR: f64 = 1e-32;
const RHO_QUIET_TERMS: usize = 3;
const TRACE_TOLERANCE: f64 = 1e-4;
const MAX_TABLE_ORDER: usize = 640;

const WIGNER_RELATIVE_FLOOR: f64 = 1e-12;
const WIGNER_QUIET_ORDERS: usize = 20;
const WIGNER_ROUNDING_TOL: f64 = 1e-9;

fn cplx(prec: u32, z: Complex64) -> Complex {
    Complex::with_val(prec, (z.re, z.im))
}

fn to_c64(z: &Complex) -> Complex64 {
    Complex64::new(z.real().to_f64(), z.imag().to_f64())
}

fn magnitude(z: &Complex) -> Float {
    Float::with_val(64, z.abs_ref())
}

fn is_pole(b: &Complex) -> bool {
    b.imag().is_zero() && *b.real() <= 0 && b.real().is_integer()
}

/// `₀F₂(;b1,b2;z)` evaluated in double precision via the multi-precision series.
pub fn hyp0f2(b1: Complex64, b2: Complex64, z: Complex64) -> Result<Complex64> {
    hyp0f2_with_precision(b1, b2, z, SERIES_PRECISION)
}

pub fn hyp0f2_with_precision(b1: Complex64, b2: Complex64, z: Complex64, prec: u32) -> Result<Complex64> {
    let value = hyp0f2_mp(&cplx(prec, b1), &cplx(prec, b2), &cplx(prec, z), prec)?;
    Ok(to_c64(&value))
}

/// Multi-precision `Σ_k z^k / (k! (b1)_k (b2)_k)` with compensated summation.
///
/// Summation stops once 50 consecutive terms stay below `10⁻³⁵` of the
/// largest term seen.
pub fn hyp0f2_mp(b1: &Complex, b2: &Complex, z: &Complex, prec: u32) -> Result<Complex> {
    if is_pole(b1) || is_pole(b2) {
        return Err(Error::HypergeometricPole(format!("b1 = {b1}, b2 = {b2}")));
    }
    let mut sum = Complex::with_val(prec, 1);
    let mut comp = Complex::with_val(prec, 0);
    let mut term = Complex::with_val(prec, 1);
    let mut largest = Float::with_val(64, 1);
    let mut quiet = 0;
    for k in 1..=SERIES_TERM_CAP {
        let shift = (k - 1) as f64;
        let denom = Complex::with_val(prec, &Complex::with_val(prec, b1 + shift) * &Complex::with_val(prec, b2 + shift));
        term *= z;
        term /= &denom;
        term /= k as f64;

        let y = Complex::with_val(prec, &term - &comp);
        let t = Complex::with_val(prec, &sum + &y);
        comp = Complex::with_val(prec, &t - &sum);
        comp -= &y;
        sum = t;

        let mag = magnitude(&term);
        if mag > largest {
            largest = mag.clone();
        }
        if mag < Float::with_val(64, &largest * SERIES_RELATIVE_FLOOR) {
            quiet += 1;
            if quiet >= SERIES_QUIET_TERMS {
                return Ok(sum);
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::SeriesNotConverged(SERIES_TERM_CAP))
}

/// Shared constants of the moment formula at a given precision.
struct MomentKernel {
    prec: u32,
    p: Complex,
    q: Complex,
    z: Complex,
    w: Complex,
    f0: Complex,
}

fn check_drive(params: &SystemParams) -> Result<f64> {
    params.validate()?;
    if params.drive.im != 0.0 || params.drive.re < 0.0 {
        return Err(Error::ComplexDrive(format!(
            "the exact steady state needs a real non-negative drive, got {}",
            params.drive
        )));
    }
    if params.chi2 == 0.0 {
        return Err(Error::InvalidParameter(
            "the exact steady state needs a nonzero Kerr coefficient; use the linear closed form".into(),
        ));
    }
    Ok(params.drive.re)
}

impl MomentKernel {
    fn new(params: &SystemParams, prec: u32) -> Result<Self> {
        let e = check_drive(params)?;
        let chi = params.chi2;
        let p = Complex::with_val(prec, (params.delta / chi, -params.gamma / (2.0 * chi)));
        let q = Complex::with_val(prec, p.conj_ref());
        if is_pole(&p) {
            return Err(Error::HypergeometricPole(format!("p = {p}")));
        }
        let ratio = Float::with_val(prec, e) / chi;
        let z = Complex::with_val(prec, Float::with_val(prec, ratio.square_ref()) * 2u32);
        // w = E/(iχ″) = −i E/χ″
        let w = Complex::with_val(prec, (Float::with_val(prec, 0), -ratio));
        let f0 = hyp0f2_mp(&p, &q, &z, prec)?;
        Ok(Self { prec, p, q, z, w, f0 })
    }

    fn rising(&self, base: &Complex, n: usize) -> Vec<Complex> {
        let mut out = Vec::with_capacity(n + 1);
        let mut acc = Complex::with_val(self.prec, 1);
        out.push(acc.clone());
        for j in 0..n {
            acc *= Complex::with_val(self.prec, base + j as f64);
            out.push(acc.clone());
        }
        out
    }

    fn powers(&self, n: usize) -> Vec<Complex> {
        let mut out = Vec::with_capacity(n + 1);
        let mut acc = Complex::with_val(self.prec, 1);
        out.push(acc.clone());
        for _ in 0..n {
            acc *= &self.w;
            out.push(acc.clone());
        }
        out
    }

    fn moment(&self, m: usize, n: usize, poch_p: &[Complex], poch_q: &[Complex], wpow: &[Complex]) -> Result<Complex> {
        if m == 0 && n == 0 {
            return Ok(Complex::with_val(self.prec, 1));
        }
        let b1 = Complex::with_val(self.prec, &self.p + n as f64);
        let b2 = Complex::with_val(self.prec, &self.q + m as f64);
        let f = hyp0f2_mp(&b1, &b2, &self.z, self.prec)?;
        let mut g = Complex::with_val(self.prec, &wpow[m + n] * &f);
        let denom = Complex::with_val(self.prec, &poch_p[n] * &poch_q[m]);
        g /= &denom;
        g /= &self.f0;
        if m % 2 == 1 {
            g = -g;
        }
        Ok(g)
    }
}

/// Single moment `G^(m,n) = ⟨a†ᵐ aⁿ⟩` of the exact steady state.
pub fn moment_g(m: usize, n: usize, params: &SystemParams) -> Result<Complex64> {
    let kernel = MomentKernel::new(params, SERIES_PRECISION)?;
    let top = m.max(n);
    let poch_p = kernel.rising(&kernel.p, top);
    let poch_q = kernel.rising(&kernel.q, top);
    let wpow = kernel.powers(m + n);
    Ok(to_c64(&kernel.moment(m, n, &poch_p, &poch_q, &wpow)?))
}

/// `⟨a⟩` of the exact steady state.
pub fn steady_field(params: &SystemParams) -> Result<Complex64> {
    moment_g(0, 1, params)
}

pub fn steady_photon_number(params: &SystemParams) -> Result<f64> {
    Ok(moment_g(1, 1, params)?.re)
}

/// `G^(2,2) / (G^(1,1))²`.
pub fn steady_g2(params: &SystemParams) -> Result<f64> {
    let n = moment_g(1, 1, params)?;
    if n.norm() <= 1e-300 {
        return Err(Error::UndefinedG2(n.re));
    }
    let g2 = moment_g(2, 2, params)? / (n * n);
    if g2.im.abs() > 1e-6 {
        return Err(Error::InvalidDensityMatrix(format!("g2 has imaginary residue {:.3e}", g2.im)));
    }
    Ok(g2.re)
}

/// Rough upper bound on the occupied photon numbers of the steady state.
fn support_estimate(n_mean: f64) -> usize {
    let n = n_mean.max(0.0);
    (n + 10.0 * n.sqrt() + 30.0).ceil() as usize
}

/// Table of `G^(m,n)` for `0 ≤ m, n ≤ max_order`, built once and read-only.
#[derive(Debug, Clone)]
pub struct MomentTable {
    params: SystemParams,
    max_order: usize,
    precision: u32,
    values: Vec<Complex>,
}

impl MomentTable {
    pub fn new(params: &SystemParams, max_order: usize) -> Result<Self> {
        Self::with_precision(params, max_order, TABLE_PRECISION)
    }

    pub fn with_precision(params: &SystemParams, max_order: usize, precision: u32) -> Result<Self> {
        let kernel = MomentKernel::new(params, precision)?;
        let poch_p = kernel.rising(&kernel.p, max_order);
        let poch_q = kernel.rising(&kernel.q, max_order);
        let wpow = kernel.powers(2 * max_order);
        let k = max_order + 1;
        let rows: Vec<Vec<Complex>> = (0..k)
            .into_par_iter()
            .map(|m| (0..k).map(|n| kernel.moment(m, n, &poch_p, &poch_q, &wpow)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params: *params,
            max_order,
            precision,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn get_mp(&self, m: usize, n: usize) -> &Complex {
        &self.values[m * (self.max_order + 1) + n]
    }

    /// `G^(m,n)` rounded to double precision.
    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        to_c64(self.get_mp(m, n))
    }

    /// Largest `|G^(m,n) − conj(G^(n,m))|` relative to `|G^(m,n)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for m in 0..=self.max_order {
            for n in 0..m {
                let a = self.get_mp(m, n);
                let b = Complex::with_val(self.precision, self.get_mp(n, m).conj_ref());
                let diff = magnitude(&Complex::with_val(self.precision, a - &b));
                let scale = magnitude(a);
                if !scale.is_zero() {
                    worst = worst.max(Float::with_val(64, &diff / &scale).to_f64());
                }
            }
        }
        worst
    }

    /// `Σ_r c_r G^(m+r, n+r)` until the terms stagnate; `None` if the table
    /// runs out first.
    fn diagonal_sum(&self, m: usize, n: usize, coeff: &[Float]) -> Option<Complex> {
        let prec = self.precision;
        let mut acc = Complex::with_val(prec, 0);
        let mut quiet = 0;
        let mut r = 0;
        while m.max(n) + r <= self.max_order && r < coeff.len() {
            let term = Complex::with_val(prec, self.get_mp(m + r, n + r) * &coeff[r]);
            acc += &term;
            let t = magnitude(&term);
            let a = magnitude(&acc);
            if t <= Float::with_val(64, &a * RHO_RELATIVE_FLOOR) || t < RHO_ABSOLUTE_FLOOR {
                quiet += 1;
                if quiet >= RHO_QUIET_TERMS {
                    return Some(acc);
                }
            } else {
                quiet = 0;
            }
            r += 1;
        }
        None
    }

    fn inverse_factorials(&self, scale: i32) -> Vec<Float> {
        // scale^r / r!
        let prec = self.precision;
        let mut out = Vec::with_capacity(self.max_order + 1);
        let mut acc = Float::with_val(prec, 1);
        for r in 0..=self.max_order {
            if r > 0 {
                acc *= scale;
                acc /= r as u32;
            }
            out.push(acc.clone());
        }
        out
    }

    /// `ρ_nm = (n! m!)^{−½} Σ_r (−1)^r/r! G^(m+r, n+r)`, Hermitized.
    pub fn density_matrix(&self, dim: usize) -> Result<FockDensityMatrix> {
        let prec = self.precision;
        let coeff = self.inverse_factorials(-1);
        let mut norms = Vec::with_capacity(dim);
        let mut f = Float::with_val(prec, 1);
        for n in 0..dim {
            if n > 0 {
                f *= n as u32;
            }
            norms.push(Float::with_val(prec, f.sqrt_ref()));
        }
        let mut raw = vec![Complex64::new(0.0, 0.0); dim * dim];
        for n in 0..dim {
            for m in 0..dim {
                let s = self.diagonal_sum(m, n, &coeff).ok_or_else(|| {
                    Error::Truncation(format!(
                        "moment table of order {} too small for density-matrix entry ({n}, {m})",
                        self.max_order
                    ))
                })?;
                let mut v = Complex::with_val(prec, &s / &norms[n]);
                v /= &norms[m];
                raw[n * dim + m] = to_c64(&v);
            }
        }
        let entries = Mat::from_fn(dim, dim, |i, j| 0.5 * (raw[i * dim + j] + raw[j * dim + i].conj()));
        let rho = FockDensityMatrix::new_unchecked(entries)?;
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > TRACE_TOLERANCE || tr.im.abs() > TRACE_TOLERANCE {
            return Err(Error::Truncation(format!(
                "steady-state trace {tr} deviates from 1; increase the Fock dimension or table precision"
            )));
        }
        Ok(rho)
    }

    /// `H(m,n) = Σ_k (−2)^k/k! G^(k+m, k+n)` for `m, n ≤ order`.
    pub fn wigner_kernel(&self, order: usize) -> WignerKernel {
        let coeff = self.inverse_factorials(-2);
        let k = order + 1;
        let values = (0..k * k)
            .into_par_iter()
            .map(|idx| self.diagonal_sum(idx / k, idx % k, &coeff).map(|v| to_c64(&v)))
            .collect();
        WignerKernel { order, values }
    }
}

/// Double-precision coefficients of the phase-space power series.
#[derive(Debug, Clone)]
pub struct WignerKernel {
    order: usize,
    values: Vec<Option<Complex64>>,
}

impl WignerKernel {
    pub fn order(&self) -> usize {
        self.order
    }

    fn get(&self, m: usize, n: usize) -> Option<Complex64> {
        self.values[m * (self.order + 1) + n]
    }

    /// `W(ζ) = (2/π) e^{−2|ζ|²} Σ_{m,n} (2ζ)^m (2ζ*)^n / (m! n!) H(m,n)`.
    ///
    /// Returns `None` when the series needs coefficients beyond the kernel
    /// or when rounding in the double-precision sum could exceed `10⁻⁹`.
    pub fn evaluate(&self, zeta: Complex64) -> Option<f64> {
        let k = self.order + 1;
        let mut u = Vec::with_capacity(k);
        let mut acc = Complex64::new(1.0, 0.0);
        for m in 0..k {
            if m > 0 {
                acc *= 2.0 * zeta / m as f64;
            }
            u.push(acc);
        }
        let prefactor = 2.0 / PI * (-2.0 * zeta.norm_sqr()).exp();
        let mut sum = Complex64::new(0.0, 0.0);
        let mut abs_sum = 0.0;
        let mut quiet = 0;
        for s in 0..=self.order {
            let mut order_abs = 0.0;
            for m in 0..=s {
                let n = s - m;
                let h = self.get(m, n)?;
                let term = u[m] * u[n].conj() * h;
                sum += term;
                order_abs += term.norm();
            }
            abs_sum += order_abs;
            if order_abs <= WIGNER_RELATIVE_FLOOR * abs_sum {
                quiet += 1;
                if quiet >= WIGNER_QUIET_ORDERS {
                    let rounding = prefactor * abs_sum * f64::EPSILON * (s as f64 + 1.0);
                    if rounding > WIGNER_ROUNDING_TOL {
                        return None;
                    }
                    return Some(prefactor * sum.re);
                }
            } else {
                quiet = 0;
            }
        }
        None
    }
}

/// Exact steady-state density matrix in a `dim`-level Fock basis.
pub fn steady_density_matrix(params: &SystemParams, dim: usize) -> Result<FockDensityMatrix> {
    let n_mean = steady_photon_number(params)?;
    let mut order = dim + support_estimate(n_mean);
    loop {
        let table = MomentTable::new(params, order)?;
        match table.density_matrix(dim) {
            Err(Error::Truncation(msg)) if msg.contains("too small") && order < MAX_TABLE_ORDER => {
                order *= 2;
            }
            other => return other,
        }
    }
}

/// Fock dimension that holds the steady state to well below `10⁻¹⁰`.
pub fn steady_dimension(params: &SystemParams) -> Result<usize> {
    let n = steady_photon_number(params)?;
    Ok((n + 8.0 * n.max(0.0).sqrt() + 15.0).ceil() as usize)
}

/// Exact steady-state Wigner function on a grid.
///
/// Points are summed from the phase-space power series; points where that
/// series cannot be trusted in double precision are evaluated by displaced
/// parity of the exact density matrix and counted in `fallback_points`.
pub fn steady_wigner(params: &SystemParams, spec: &GridSpec) -> Result<WignerGrid> {
    spec.validate()?;
    let n_mean = steady_photon_number(params)?;
    let radius = [spec.x_min, spec.x_max, spec.p_min, spec.p_max]
        .iter()
        .fold(0.0f64, |a, b| a.max(b.abs()))
        * std::f64::consts::SQRT_2;
    // (2Rr)^m/m! with r ~ field reach sets how many orders the series needs
    let reach = 2.0 * radius * (n_mean.max(0.0).sqrt() + 2.0);
    let series_order = ((reach * std::f64::consts::E).ceil() as usize + 2 * WIGNER_QUIET_ORDERS).max(40);
    let table = MomentTable::new(params, series_order + support_estimate(n_mean))?;
    let kernel = table.wigner_kernel(series_order);

    let fallback: OnceLock<Result<FockDensityMatrix>> = OnceLock::new();
    let fallback_rho = || -> Result<&FockDensityMatrix> {
        fallback
            .get_or_init(|| steady_density_matrix(params, steady_dimension(params)?))
            .as_ref()
            .map_err(|e| Error::Truncation(format!("fallback density matrix: {e}")))
    };

    let points: Vec<(Option<f64>, Complex64)> = (0..spec.np * spec.nx)
        .into_par_iter()
        .map(|idx| {
            let zeta = spec.point(idx % spec.nx, idx / spec.nx);
            (kernel.evaluate(zeta), zeta)
        })
        .collect();
    let mut values = Vec::with_capacity(points.len());
    let mut fallback_points = 0;
    for (v, zeta) in points {
        match v {
            Some(w) => values.push(w),
            None => {
                fallback_points += 1;
                values.push(observables::wigner_at(fallback_rho()?, zeta));
            }
        }
    }
    let support_warning = match fallback.get() {
        Some(Ok(rho)) => !observables::grid_covers_support(rho, spec),
        _ => {
            let n2 = table.get(2, 2).re + n_mean;
            let var = (n2 - n_mean * n_mean).max(0.0);
            !spec.contains_disc(Complex64::new(0.0, 0.0), (n_mean + 3.0 * var.sqrt()).sqrt())
        }
    };
    Ok(WignerGrid {
        spec: *spec,
        values,
        time: None,
        support_warning,
        fallback_points,
    })
}
