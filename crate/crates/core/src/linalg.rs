//! Thin wrappers over the dense decompositions used throughout the crate.

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub(crate) fn eigh(h: &Mat<Complex64>) -> Result<(Vec<f64>, Mat<Complex64>)> {
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::EigenFailure(format!("{e:?}")))?;
    let values = evd.S().column_vector().iter().map(|v| v.re).collect();
    Ok((values, evd.U().to_owned()))
}

pub(crate) fn eigvalsh(h: &Mat<Complex64>) -> Result<Vec<f64>> {
    h.self_adjoint_eigenvalues(Side::Lower)
        .map(|v| v.into_iter().collect())
        .map_err(|e| Error::EigenFailure(format!("{e:?}")))
}

/// `exp(−iτH)` for Hermitian `H`.
pub(crate) fn expm_hermitian(h: &Mat<Complex64>, tau: f64) -> Result<Mat<Complex64>> {
    let (values, vecs) = eigh(h)?;
    Ok(propagator_from_eigh(&values, &vecs, tau))
}

pub(crate) fn propagator_from_eigh(values: &[f64], vecs: &Mat<Complex64>, tau: f64) -> Mat<Complex64> {
    let n = values.len();
    let phases: Vec<Complex64> = values.iter().map(|l| Complex64::from_polar(1.0, -l * tau)).collect();
    let scaled = Mat::from_fn(n, n, |i, j| vecs[(i, j)] * phases[j]);
    &scaled * vecs.adjoint()
}

/// `z·M`
pub(crate) fn scaled(m: &Mat<Complex64>, z: Complex64) -> Mat<Complex64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * z)
}

/// Largest elementwise deviation of `H` from `H†`.
pub(crate) fn hermiticity_defect(h: &Mat<Complex64>) -> f64 {
    let n = h.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `max |U†U − 1|`.
pub(crate) fn unitarity_defect(u: &Mat<Complex64>) -> f64 {
    let g = u.adjoint() * u;
    let n = g.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - c(target, 0.0)).norm());
        }
    }
    worst
}

/// Kronecker product `A ⊗ B` with row index `i_a·dim_b + i_b`.
pub(crate) fn kron(a: &Mat<Complex64>, b: &Mat<Complex64>) -> Mat<Complex64> {
    let (ra, ca) = (a.nrows(), a.ncols());
    let (rb, cb) = (b.nrows(), b.ncols());
    Mat::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
}
