//! Orthogonal-polynomial mapping of the flat reservoir onto a hopping chain.
//!
//! With normalized Legendre modes `U_n(x) = √((2n+1)/(2x_m))·L_n(x/x_m)` the
//! continuum bath becomes a nearest-neighbour chain with zero on-site
//! energies, system coupling `η′ = c₀√(2ω_c)` and hoppings
//! `η_n = ω_c (n+1)/√((2n+1)(2n+3))`, which approach `ω_c/2` from below.

use faer::Mat;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::SystemParams;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainCoefficients {
    /// Coupling `η′` between the system (site 0) and the first bath site.
    pub eta_sys: f64,
    /// On-site energies of the bath sites (all zero for the flat band).
    pub site_freqs: Vec<f64>,
    /// Hoppings between consecutive bath sites, `N − 2` entries.
    pub hoppings: Vec<f64>,
}

impl ChainCoefficients {
    /// Number of chain sites including the system.
    pub fn n_sites(&self) -> usize {
        self.site_freqs.len() + 1
    }

    /// Coupling on chain bond `(bond, bond + 1)`.
    pub fn bond_coupling(&self, bond: usize) -> f64 {
        if bond == 0 {
            self.eta_sys
        } else {
            self.hoppings[bond - 1]
        }
    }

    /// Fastest group velocity of the chain, in sites per unit time.
    pub fn group_velocity(&self, params: &SystemParams) -> f64 {
        params.cutoff
    }

    /// Time for an excitation leaving the system to reflect off the chain end
    /// and return.
    pub fn recurrence_time(&self, params: &SystemParams) -> f64 {
        2.0 * (self.n_sites() as f64 - 1.0) / self.group_velocity(params)
    }
}

pub fn build_chain(params: &SystemParams, n_sites: usize) -> Result<ChainCoefficients> {
    if n_sites < 2 {
        return Err(Error::InvalidParameter(format!("n_sites must be >= 2, got {n_sites}")));
    }
    params.validate()?;
    let wc = params.cutoff;
    let eta_sys = params.coupling_density() * (2.0 * wc).sqrt();
    let hoppings = (0..n_sites - 2)
        .map(|n| {
            let n = n as f64;
            wc * (n + 1.0) / ((2.0 * n + 1.0) * (2.0 * n + 3.0)).sqrt()
        })
        .collect();
    Ok(ChainCoefficients {
        eta_sys,
        site_freqs: vec![0.0; n_sites - 1],
        hoppings,
    })
}

/// System amplitude `⟨a⟩(t)` of the chain without Kerr term, from
/// `⟨a⟩(0) = initial` and an empty bath.
///
/// With `χ″ = 0` the amplitudes `y = (⟨a⟩, ⟨b_0⟩, …)` obey the closed linear
/// system `dy/dt = −iAy + E e_0`, solved here through the eigenbasis of the
/// Hermitian chain matrix `A`.
pub fn linear_chain_field(
    params: &SystemParams,
    chain: &ChainCoefficients,
    initial: Complex64,
    times: &[f64],
) -> Result<Vec<Complex64>> {
    if params.chi2 != 0.0 {
        return Err(Error::InvalidParameter("linear chain amplitude needs chi2 = 0".into()));
    }
    let n = chain.n_sites();
    let a = Mat::from_fn(n, n, |i, j| {
        let v = if i == j {
            if i == 0 {
                params.delta
            } else {
                chain.site_freqs[i - 1]
            }
        } else if i.abs_diff(j) == 1 {
            chain.bond_coupling(i.min(j))
        } else {
            0.0
        };
        Complex64::new(v, 0.0)
    });
    let (values, vecs) = linalg::eigh(&a)?;
    // projections of e_0 onto the eigenvectors
    let proj: Vec<Complex64> = (0..n).map(|k| vecs[(0, k)].conj()).collect();
    Ok(times
        .iter()
        .map(|&t| {
            (0..n)
                .map(|k| {
                    let l = values[k];
                    let phase = Complex64::from_polar(1.0, -l * t);
                    let forced = if (l * t).abs() < 1e-8 {
                        Complex64::new(t, 0.0)
                    } else {
                        (Complex64::new(1.0, 0.0) - phase) / Complex64::new(0.0, l)
                    };
                    vecs[(0, k)] * proj[k] * (phase * initial + forced * params.drive)
                })
                .sum()
        })
        .collect())
}

/// `L_0..=L_n_max` at `x` by the three-term recurrence.
pub fn legendre_all(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    if n_max >= 1 {
        out.push(x);
    }
    for n in 1..n_max {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0) * x * out[n] - nf * out[n - 1]) / (nf + 1.0);
        out.push(next);
    }
    out
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` (Newton on the recurrence).
pub fn gauss_legendre(points: usize) -> (Vec<f64>, Vec<f64>) {
    let n = points;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let l = legendre_all(n, x);
            let (pn, pn1) = (l[n], l[n - 1]);
            let dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let l = legendre_all(n, x);
        let dp = n as f64 * (x * l[n] - l[n - 1]) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Largest deviation of `∫U_n U_m dx` from `δ_nm` for `n, m ≤ n_max`.
///
/// The check is scale free; it is carried out at `x_m = 1`.
pub fn verify_legendre_orthonormality(n_max: usize, quad_points: usize) -> Result<f64> {
    let degree = 2 * n_max;
    let required = n_max + 1;
    if quad_points < required {
        return Err(Error::UnderResolvedQuadrature {
            points: quad_points,
            degree,
            required,
        });
    }
    let x_m = 1.0;
    let (nodes, weights) = gauss_legendre(quad_points);
    let mut gram = vec![vec![0.0; n_max + 1]; n_max + 1];
    for (&t, &w) in nodes.iter().zip(&weights) {
        let l = legendre_all(n_max, t);
        let u: Vec<f64> = (0..=n_max)
            .map(|n| ((2.0 * n as f64 + 1.0) / (2.0 * x_m)).sqrt() * l[n])
            .collect();
        for n in 0..=n_max {
            for m in 0..=n_max {
                // dx = x_m dt
                gram[n][m] += w * x_m * u[n] * u[m];
            }
        }
    }
    let mut dev: f64 = 0.0;
    for (n, row) in gram.iter().enumerate() {
        for (m, v) in row.iter().enumerate() {
            let target = if n == m { 1.0 } else { 0.0 };
            dev = dev.max((v - target).abs());
        }
    }
    Ok(dev)
}
