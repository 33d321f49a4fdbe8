//! Truncated Fock-space operators and coherent/displaced number states.

use faer::Mat;
use num_complex::Complex64;

/// Annihilation operator in the `dim`-level truncated Fock basis.
pub fn annihilation(dim: usize) -> Mat<Complex64> {
    Mat::from_fn(dim, dim, |i, j| {
        if j == i + 1 {
            Complex64::new((j as f64).sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

pub fn creation(dim: usize) -> Mat<Complex64> {
    annihilation(dim).adjoint().to_owned()
}

pub fn number(dim: usize) -> Mat<Complex64> {
    Mat::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::new(i as f64, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

pub fn identity(dim: usize) -> Mat<Complex64> {
    Mat::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Fock amplitudes `e^{−|α|²/2} αⁿ/√n!` for `n < dim`, not renormalized.
pub fn coherent_amplitudes(alpha: Complex64, dim: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(dim);
    let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            c = c * alpha / (n as f64).sqrt();
        }
        out.push(c);
    }
    out
}

/// Truncated coherent state renormalized to unit norm.
pub fn coherent_state(alpha: Complex64, dim: usize) -> Vec<Complex64> {
    let mut v = coherent_amplitudes(alpha, dim);
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for c in v.iter_mut() {
        *c /= norm;
    }
    v
}

/// Probability mass of `|α⟩` lying outside the first `dim` Fock levels.
pub fn coherent_tail_mass(alpha: Complex64, dim: usize) -> f64 {
    let kept: f64 = coherent_amplitudes(alpha, dim).iter().map(|c| c.norm_sqr()).sum();
    (1.0 - kept).max(0.0)
}

/// Smallest truncation keeping `|α⟩` to within `tol` of unit norm.
pub fn required_dim(alpha: Complex64, tol: f64) -> usize {
    let mut dim = 1;
    while coherent_tail_mass(alpha, dim) > tol && dim < 10_000 {
        dim += 1;
    }
    dim
}

/// Columns `D(β)|n⟩` for `n < cols`, exact in their first `rows` entries.
///
/// Uses `D(β)|n⟩ = (a† − β*) D(β)|n−1⟩ / √n` seeded with `D(β)|0⟩ = |β⟩`.
/// Row `k` depends only on rows `≤ k` of the previous column, so truncating
/// to `rows` introduces no error in the retained block.
pub fn displaced_number_states(beta: Complex64, cols: usize, rows: usize) -> Mat<Complex64> {
    let mut out = Mat::<Complex64>::zeros(rows, cols);
    let seed = coherent_amplitudes(beta, rows);
    for (k, c) in seed.into_iter().enumerate() {
        out[(k, 0)] = c;
    }
    let bc = beta.conj();
    for n in 1..cols {
        let inv = 1.0 / (n as f64).sqrt();
        for k in (0..rows).rev() {
            let raised = if k > 0 {
                out[(k - 1, n - 1)] * (k as f64).sqrt()
            } else {
                Complex64::new(0.0, 0.0)
            };
            out[(k, n)] = (raised - out[(k, n - 1)] * bc) * inv;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_commutator_away_from_edge() {
        let a = annihilation(6);
        let ad = creation(6);
        let comm = &a * &ad - &ad * &a;
        for i in 0..5 {
            assert!((comm[(i, i)].re - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn coherent_tail_at_m8() {
        // Poisson(6.25) mass beyond n = 7
        let alpha = Complex64::new(2.5, 0.0);
        let mut p = (-6.25f64).exp();
        let mut kept = 0.0;
        for n in 0..8 {
            if n > 0 {
                p *= 6.25 / n as f64;
            }
            kept += p;
        }
        assert!((coherent_tail_mass(alpha, 8) - (1.0 - kept)).abs() < 1e-12);
        assert!(coherent_tail_mass(alpha, 8) > 1e-6);
        // beyond n = 19 about 9.3·10⁻⁶ remains
        let tail20 = coherent_tail_mass(alpha, 20);
        assert!(tail20 > 9e-6 && tail20 < 1e-5, "{tail20}");
        assert!(coherent_tail_mass(alpha, 22) < 1e-6);
    }

    #[test]
    fn displaced_states_are_orthonormal() {
        let beta = Complex64::new(1.2, -0.7);
        let v = displaced_number_states(beta, 6, 80);
        let g = v.adjoint() * &v;
        for i in 0..6 {
            for j in 0..6 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - Complex64::new(target, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn displaced_vacuum_is_coherent() {
        let beta = Complex64::new(0.3, 0.9);
        let v = displaced_number_states(beta, 1, 30);
        let c = coherent_amplitudes(beta, 30);
        for k in 0..30 {
            assert!((v[(k, 0)] - c[k]).norm() < 1e-15);
        }
    }
}
