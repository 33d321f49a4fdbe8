//! Matrix product state of the system + bath chain and second-order TEBD.
//!
//! Site tensors are kept right-canonical, `B_i = Γ_i Λ_i`, together with the
//! Schmidt vectors `Λ_i` of every bond. Two-site updates then need no inverse
//! Schmidt values:
//!
//! ```text
//! θ̃ = U · (B_i B_{i+1}),   θ = Λ_{i−1} θ̃ = X S Y†
//! B_{i+1} ← Y†,   B_i ← θ̃ Y / ‖S‖,   Λ_i ← S / ‖S‖
//! ```
//!
//! Vidal's `Γ_i` is available through [`MpsState::vidal_gamma`].

use std::io::{Read, Write};

use faer::Mat;
use num_complex::Complex64;
use serde::Serialize;

use crate::chain::ChainCoefficients;
use crate::error::{Error, Result};
use crate::fock;
use crate::linalg::{self, c};
use crate::model::{InitialState, SimulationConfig, SystemParams};
use crate::observables::FockDensityMatrix;

/// Singular values below this are dropped regardless of the bond limit.
pub const SINGULAR_FLOOR: f64 = 1e-12;
/// Largest tolerated norm loss of a truncated initial coherent state.
pub const COHERENT_LOSS_TOL: f64 = 1e-5;
const GATE_TOL: f64 = 1e-12;
const CANONICAL_TOL: f64 = 1e-8;

const CHECKPOINT_MAGIC: &[u8; 8] = b"KTEBDMPS";
const CHECKPOINT_VERSION: u32 = 1;

/// Rank-3 tensor `(left bond, physical, right bond)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteTensor {
    pub left: usize,
    pub phys: usize,
    pub right: usize,
    pub data: Vec<Complex64>,
}

impl SiteTensor {
    fn zeros(left: usize, phys: usize, right: usize) -> Self {
        Self {
            left,
            phys,
            right,
            data: vec![c(0.0, 0.0); left * phys * right],
        }
    }

    #[inline]
    pub fn get(&self, l: usize, s: usize, r: usize) -> Complex64 {
        self.data[(l * self.phys + s) * self.right + r]
    }

    #[inline]
    fn set(&mut self, l: usize, s: usize, r: usize, v: Complex64) {
        self.data[(l * self.phys + s) * self.right + r] = v;
    }

    /// `(left·phys) × right` matrix view.
    fn as_left_matrix(&self) -> Mat<Complex64> {
        Mat::from_fn(self.left * self.phys, self.right, |i, r| self.data[i * self.right + r])
    }

    /// `left × (phys·right)` matrix view.
    fn as_right_matrix(&self) -> Mat<Complex64> {
        let cols = self.phys * self.right;
        Mat::from_fn(self.left, cols, |l, j| self.data[l * cols + j])
    }

    fn from_left_matrix(left: usize, phys: usize, m: &Mat<Complex64>) -> Self {
        let right = m.ncols();
        let mut t = Self::zeros(left, phys, right);
        for i in 0..left * phys {
            for r in 0..right {
                t.data[i * right + r] = m[(i, r)];
            }
        }
        t
    }

    fn from_right_matrix(phys: usize, right: usize, m: &Mat<Complex64>) -> Self {
        let left = m.nrows();
        let cols = phys * right;
        let mut t = Self::zeros(left, phys, right);
        for l in 0..left {
            for j in 0..cols {
                t.data[l * cols + j] = m[(l, j)];
            }
        }
        t
    }

    /// `max |Σ_{s,r} B[l,s,r] B*[l',s,r] − δ_ll'|`.
    fn right_canonical_defect(&self) -> f64 {
        let m = self.as_right_matrix();
        let g = &m * m.adjoint();
        let mut worst: f64 = 0.0;
        for i in 0..self.left {
            for j in 0..self.left {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - c(target, 0.0)).norm());
            }
        }
        worst
    }
}

/// Chain state in right-canonical form with explicit Schmidt vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct MpsState {
    sites: Vec<SiteTensor>,
    /// `lambdas[i]` lives on the bond between sites `i` and `i + 1`.
    lambdas: Vec<Vec<f64>>,
    bond_limit: usize,
    trunc_error: f64,
}

impl MpsState {
    /// Product state from one normalized local vector per site.
    pub fn product(locals: &[Vec<Complex64>], bond_limit: usize) -> Result<Self> {
        if locals.len() < 2 {
            return Err(Error::InvalidParameter("a chain needs at least two sites".into()));
        }
        if bond_limit < 1 {
            return Err(Error::InvalidParameter("bond limit must be >= 1".into()));
        }
        let mut sites = Vec::with_capacity(locals.len());
        for (i, v) in locals.iter().enumerate() {
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("local state of site {i} has norm {norm}")));
            }
            let mut t = SiteTensor::zeros(1, v.len(), 1);
            for (s, z) in v.iter().enumerate() {
                t.set(0, s, 0, *z);
            }
            sites.push(t);
        }
        Ok(Self {
            lambdas: vec![vec![1.0]; locals.len() - 1],
            sites,
            bond_limit,
            trunc_error: 0.0,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn site(&self, i: usize) -> &SiteTensor {
        &self.sites[i]
    }

    pub fn lambda(&self, bond: usize) -> &[f64] {
        &self.lambdas[bond]
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.lambdas.iter().map(|l| l.len()).collect()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.lambdas.iter().map(|l| l.len()).max().unwrap_or(1)
    }

    pub fn bond_limit(&self) -> usize {
        self.bond_limit
    }

    /// Running sum of discarded squared Schmidt weight.
    pub fn trunc_error(&self) -> f64 {
        self.trunc_error
    }

    /// `Γ_i = B_i Λ_i⁻¹` with Schmidt values floored at `10⁻¹²`.
    pub fn vidal_gamma(&self, site: usize) -> SiteTensor {
        let mut g = self.sites[site].clone();
        if site + 1 < self.n_sites() {
            let lam = &self.lambdas[site];
            for l in 0..g.left {
                for s in 0..g.phys {
                    for r in 0..g.right {
                        let v = g.get(l, s, r) / lam[r].max(SINGULAR_FLOOR);
                        g.set(l, s, r, v);
                    }
                }
            }
        }
        g
    }

    /// `⟨Ψ|Ψ⟩` by full left-to-right contraction, independent of the gauge.
    pub fn norm_squared(&self) -> f64 {
        let mut env = Mat::from_fn(1, 1, |_, _| c(1.0, 0.0));
        for b in &self.sites {
            let mut next = Mat::<Complex64>::zeros(b.right, b.right);
            for s in 0..b.phys {
                let bs = Mat::from_fn(b.left, b.right, |l, r| b.get(l, s, r));
                next += bs.adjoint() * &env * &bs;
            }
            env = next;
        }
        env[(0, 0)].re
    }

    /// Dense state vector, site 0 most significant. Only for small chains.
    pub fn to_state_vector(&self) -> Result<Vec<Complex64>> {
        let total: usize = self.sites.iter().map(|s| s.phys).product();
        if total > 1 << 22 {
            return Err(Error::InvalidParameter(format!("state vector of length {total} too large")));
        }
        // rows: physical multi-index so far, cols: open right bond
        let mut acc = Mat::from_fn(1, 1, |_, _| c(1.0, 0.0));
        for b in &self.sites {
            let m = b.as_right_matrix();
            let prod = &acc * &m; // (rows) × (phys·right)
            let rows = acc.nrows() * b.phys;
            acc = Mat::from_fn(rows, b.right, |i, r| prod[(i / b.phys, (i % b.phys) * b.right + r)]);
        }
        Ok((0..acc.nrows()).map(|i| acc[(i, 0)]).collect())
    }

    /// Reduced density matrix of `site`, `ρ = Σ λ_{site−1}[l]² B[l,s,r] B*[l,s',r]`.
    pub fn reduced_density_matrix(&self, site: usize) -> Result<FockDensityMatrix> {
        if site >= self.n_sites() {
            return Err(Error::InvalidParameter(format!("site {site} outside chain of {}", self.n_sites())));
        }
        let b = &self.sites[site];
        let defect = b.right_canonical_defect();
        if defect > CANONICAL_TOL {
            return Err(Error::CanonicalFormViolated { site, deviation: defect });
        }
        let weights: Vec<f64> = if site == 0 {
            vec![1.0]
        } else {
            self.lambdas[site - 1].iter().map(|x| x * x).collect()
        };
        let d = b.phys;
        let mut rho = Mat::<Complex64>::zeros(d, d);
        for (l, w) in weights.iter().enumerate() {
            for s in 0..d {
                for t in 0..d {
                    let mut acc = c(0.0, 0.0);
                    for r in 0..b.right {
                        acc += b.get(l, s, r) * b.get(l, t, r).conj();
                    }
                    rho[(s, t)] += acc * *w;
                }
            }
        }
        let herm = Mat::from_fn(d, d, |i, j| 0.5 * (rho[(i, j)] + rho[(j, i)].conj()));
        FockDensityMatrix::new(herm)
    }

    /// Largest right-canonical defect over all sites.
    pub fn canonical_defect(&self) -> f64 {
        self.sites.iter().map(|b| b.right_canonical_defect()).fold(0.0, f64::max)
    }

    /// Restores exact right-canonical form, normalizes the state, and
    /// recomputes every Schmidt vector. A pure gauge change otherwise.
    ///
    /// A right-to-left QR sweep makes sites `1..N` right-orthonormal; a
    /// left-to-right SVD sweep then rotates each right bond into its Schmidt
    /// basis.
    pub fn recanonicalize(&mut self) -> Result<()> {
        let n = self.n_sites();
        for i in (1..n).rev() {
            let b = &self.sites[i];
            let (d, dr) = (b.phys, b.right);
            let qr = b.as_right_matrix().adjoint().to_owned().qr();
            let q = qr.compute_thin_Q();
            let r = qr.thin_R().to_owned();
            let qh = q.adjoint().to_owned();
            self.sites[i] = SiteTensor::from_right_matrix(d, dr, &qh);
            let prev = &self.sites[i - 1];
            let absorbed = prev.as_left_matrix() * r.adjoint();
            self.sites[i - 1] = SiteTensor::from_left_matrix(prev.left, prev.phys, &absorbed);
        }
        let norm = self.sites[0].data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::CanonicalFormViolated { site: 0, deviation: norm });
        }
        for z in self.sites[0].data.iter_mut() {
            *z /= norm;
        }
        let mut weights = vec![1.0];
        for i in 0..n - 1 {
            let b = &self.sites[i];
            let (dl, d, dr) = (b.left, b.phys, b.right);
            let center = Mat::from_fn(dl * d, dr, |ls, r| b.data[ls * dr + r] * weights[ls / d]);
            let svd = center.thin_svd().map_err(|_| Error::SvdFailure { bond: i })?;
            let sv: Vec<f64> = svd.S().column_vector().iter().map(|z| z.re).collect();
            let keep = sv.iter().take_while(|x| **x >= SINGULAR_FLOOR).count().max(1);
            let v = svd.V().subcols(0, keep);
            let rotated = b.as_left_matrix() * v;
            self.sites[i] = SiteTensor::from_left_matrix(dl, d, &rotated);
            let next = &self.sites[i + 1];
            let moved = v.adjoint() * next.as_right_matrix();
            self.sites[i + 1] = SiteTensor::from_right_matrix(next.phys, next.right, &moved);
            let nrm = sv[..keep].iter().map(|x| x * x).sum::<f64>().sqrt();
            self.lambdas[i] = sv[..keep].iter().map(|x| x / nrm).collect();
            weights = self.lambdas[i].clone();
        }
        Ok(())
    }

    /// Sorted, non-negative, unit-norm Schmidt vectors and bond limit respected.
    pub fn check_invariants(&self) -> Result<()> {
        for (bond, lam) in self.lambdas.iter().enumerate() {
            let sorted = lam.windows(2).all(|w| w[0] >= w[1]);
            let norm: f64 = lam.iter().map(|x| x * x).sum();
            if !sorted || lam.iter().any(|x| *x < 0.0) || (norm - 1.0).abs() > 1e-10 || lam.len() > self.bond_limit {
                return Err(Error::CanonicalFormViolated {
                    site: bond,
                    deviation: (norm - 1.0).abs(),
                });
            }
        }
        Ok(())
    }

    /// Writes the state in the checkpoint layout.
    ///
    /// ```text
    /// magic "KTEBDMPS" | u32 version | u64 n_sites | u64 bond_limit | f64 trunc_error
    /// per site:  u64 left, u64 phys, u64 right
    /// per bond:  u64 len, len × f64
    /// per site:  left·phys·right × (f64 re, f64 im), row-major (l, s, r)
    /// ```
    ///
    /// All integers and floats are little-endian.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(self.n_sites() as u64).to_le_bytes())?;
        w.write_all(&(self.bond_limit as u64).to_le_bytes())?;
        w.write_all(&self.trunc_error.to_le_bytes())?;
        for s in &self.sites {
            for d in [s.left, s.phys, s.right] {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
        }
        for lam in &self.lambdas {
            w.write_all(&(lam.len() as u64).to_le_bytes())?;
            for x in lam {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        for s in &self.sites {
            for z in &s.data {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        fn u64_of<R: Read>(r: &mut R) -> Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        }
        fn f64_of<R: Read>(r: &mut R) -> Result<f64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        }
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let mut v = [0u8; 4];
        r.read_exact(&mut v)?;
        if u32::from_le_bytes(v) != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", u32::from_le_bytes(v))));
        }
        let n = u64_of(&mut r)? as usize;
        if !(2..=100_000).contains(&n) {
            return Err(Error::Checkpoint(format!("implausible chain length {n}")));
        }
        let bond_limit = u64_of(&mut r)? as usize;
        let trunc_error = f64_of(&mut r)?;
        let mut dims = Vec::with_capacity(n);
        for _ in 0..n {
            let d = (u64_of(&mut r)? as usize, u64_of(&mut r)? as usize, u64_of(&mut r)? as usize);
            if d.0 * d.1 * d.2 > 1 << 28 {
                return Err(Error::Checkpoint("implausible tensor size".into()));
            }
            dims.push(d);
        }
        let mut lambdas = Vec::with_capacity(n - 1);
        for bond in 0..n - 1 {
            let len = u64_of(&mut r)? as usize;
            if len != dims[bond].2 || len != dims[bond + 1].0 {
                return Err(Error::Checkpoint(format!("bond {bond} dimension mismatch")));
            }
            lambdas.push((0..len).map(|_| f64_of(&mut r)).collect::<Result<Vec<_>>>()?);
        }
        let mut sites = Vec::with_capacity(n);
        for (left, phys, right) in dims {
            let mut t = SiteTensor::zeros(left, phys, right);
            for z in t.data.iter_mut() {
                *z = c(f64_of(&mut r)?, f64_of(&mut r)?);
            }
            sites.push(t);
        }
        if sites[0].left != 1 || sites[n - 1].right != 1 {
            return Err(Error::Checkpoint("open boundary bonds must have dimension 1".into()));
        }
        Ok(Self {
            sites,
            lambdas,
            bond_limit,
            trunc_error,
        })
    }

    /// Applies a two-site gate on `(bond, bond + 1)` and truncates.
    pub fn apply_gate(&mut self, gate: &TwoSiteGate) -> Result<()> {
        let i = gate.bond;
        if i + 1 >= self.n_sites() {
            return Err(Error::InvalidParameter(format!("gate bond {i} outside chain")));
        }
        let (bi, bj) = (&self.sites[i], &self.sites[i + 1]);
        let (dl, di, dj, dr) = (bi.left, bi.phys, bj.phys, bj.right);
        if (di, dj) != gate.dims {
            return Err(Error::InvalidParameter(format!("gate on bond {i} has dims {:?}", gate.dims)));
        }
        // θ̃ = B_i B_{i+1}: (dl·di) × (dj·dr)
        let pair = bi.as_left_matrix() * bj.as_right_matrix();
        // regroup to (di·dj) × (dl·dr), apply U, and regroup back
        let x = Mat::from_fn(di * dj, dl * dr, |st, lr| {
            let (s, t) = (st / dj, st % dj);
            let (l, r) = (lr / dr, lr % dr);
            pair[(l * di + s, t * dr + r)]
        });
        let y = &gate.matrix * &x;
        let theta_tilde = Mat::from_fn(dl * di, dj * dr, |ls, tr| {
            let (l, s) = (ls / di, ls % di);
            let (t, r) = (tr / dr, tr % dr);
            y[(s * dj + t, l * dr + r)]
        });
        let weights: Vec<f64> = if i == 0 { vec![1.0] } else { self.lambdas[i - 1].clone() };
        let theta = Mat::from_fn(dl * di, dj * dr, |ls, tr| theta_tilde[(ls, tr)] * weights[ls / di]);

        let svd = theta.thin_svd().map_err(|_| Error::SvdFailure { bond: i })?;
        let sv: Vec<f64> = svd.S().column_vector().iter().map(|z| z.re).collect();
        if sv.iter().any(|x| !x.is_finite()) {
            return Err(Error::SvdFailure { bond: i });
        }
        let total: f64 = sv.iter().map(|x| x * x).sum();
        let mut keep = sv.iter().take(self.bond_limit).take_while(|x| **x >= SINGULAR_FLOOR).count();
        keep = keep.max(1);
        let kept: f64 = sv[..keep].iter().map(|x| x * x).sum();
        self.trunc_error += ((total - kept) / total).max(0.0);
        let norm = kept.sqrt();

        let v = svd.V();
        let mut new_j = SiteTensor::zeros(keep, dj, dr);
        for k in 0..keep {
            for t in 0..dj {
                for r in 0..dr {
                    new_j.set(k, t, r, v[(t * dr + r, k)].conj());
                }
            }
        }
        let vk = v.subcols(0, keep);
        let bi_mat = &theta_tilde * vk;
        let mut new_i = SiteTensor::zeros(dl, di, keep);
        for ls in 0..dl * di {
            for k in 0..keep {
                new_i.data[ls * keep + k] = bi_mat[(ls, k)] / norm;
            }
        }
        self.sites[i] = new_i;
        self.sites[i + 1] = new_j;
        self.lambdas[i] = sv[..keep].iter().map(|x| x / norm).collect();
        Ok(())
    }
}

/// Product initial state: coherent system, vacuum bath.
pub fn init_state(config: &SimulationConfig, initial: &InitialState) -> Result<MpsState> {
    config.validate()?;
    let alpha = initial.alpha();
    let lost = fock::coherent_tail_mass(alpha, config.local_dim);
    if lost > COHERENT_LOSS_TOL {
        return Err(Error::CoherentTruncation {
            amplitude: initial.amplitude,
            local_dim: config.local_dim,
            lost,
            required: fock::required_dim(alpha, COHERENT_LOSS_TOL),
        });
    }
    let mut locals = vec![fock::coherent_state(alpha, config.local_dim)];
    for site in 1..config.n_sites {
        let mut v = vec![c(0.0, 0.0); config.site_dim(site)];
        v[0] = c(1.0, 0.0);
        locals.push(v);
    }
    MpsState::product(&locals, config.bond_dim)
}

/// `exp(−iτ h)` on the bond `(bond, bond + 1)`; `matrix` acts on the
/// product index `s·dims.1 + t`.
#[derive(Debug, Clone)]
pub struct TwoSiteGate {
    pub bond: usize,
    pub dims: (usize, usize),
    pub tau: f64,
    pub matrix: Mat<Complex64>,
}

impl TwoSiteGate {
    /// Exponentiates a Hermitian two-site Hamiltonian and checks unitarity.
    pub fn from_hamiltonian(bond: usize, dims: (usize, usize), h: &Mat<Complex64>, tau: f64) -> Result<Self> {
        let dev = linalg::hermiticity_defect(h);
        if dev > GATE_TOL {
            return Err(Error::NonHermitianHamiltonian { bond, deviation: dev });
        }
        let matrix = linalg::expm_hermitian(h, tau)?;
        let udev = linalg::unitarity_defect(&matrix);
        if udev > GATE_TOL {
            return Err(Error::NonUnitaryGate { bond, deviation: udev });
        }
        Ok(Self { bond, dims, tau, matrix })
    }

    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(&self.matrix)
    }
}

/// Gates of one second-order Trotter step `F(δt/2) G(δt) F(δt/2)`.
///
/// `odd` acts on bonds `(0,1), (2,3), …` (sites counted from one these start
/// at odd sites) and carries the whole system Hamiltonian on bond 0; `even`
/// acts on bonds `(1,2), (3,4), …`.
#[derive(Debug, Clone)]
pub struct GateSet {
    pub dt: f64,
    pub odd: Vec<TwoSiteGate>,
    pub even: Vec<TwoSiteGate>,
}

/// `H_S = Δa†a + χ″a†²a² + i(Ea† − E*a)` on a `dim`-level system.
pub fn system_hamiltonian(params: &SystemParams, dim: usize) -> Mat<Complex64> {
    let a = fock::annihilation(dim);
    let ad = fock::creation(dim);
    let n = &ad * &a;
    let kerr = &ad * &ad * &a * &a;
    let i = c(0.0, 1.0);
    let h = linalg::scaled(&n, c(params.delta, 0.0))
        + linalg::scaled(&kerr, c(params.chi2, 0.0))
        + linalg::scaled(&ad, i * params.drive)
        - linalg::scaled(&a, i * params.drive.conj());
    // remove rounding asymmetry of the dense products
    Mat::from_fn(dim, dim, |r, s| (h[(r, s)] + h[(s, r)].conj()) * 0.5)
}

/// Two-site Hamiltonian of chain bond `bond`.
pub fn bond_hamiltonian(
    params: &SystemParams,
    chain: &ChainCoefficients,
    config: &SimulationConfig,
    bond: usize,
) -> Mat<Complex64> {
    let (di, dj) = (config.site_dim(bond), config.site_dim(bond + 1));
    let g = chain.bond_coupling(bond);
    let (ai, aj) = (fock::annihilation(di), fock::annihilation(dj));
    let hop = linalg::kron(&ai.adjoint().to_owned(), &aj) + linalg::kron(&ai, &aj.adjoint().to_owned());
    let mut h = linalg::scaled(&hop, c(g, 0.0));
    let onsite_i = if bond == 0 {
        system_hamiltonian(params, di)
    } else {
        linalg::scaled(&fock::number(di), c(chain.site_freqs[bond - 1], 0.0))
    };
    h += linalg::kron(&onsite_i, &fock::identity(dj));
    if bond + 2 == config.n_sites {
        // the last site has no bond of its own to the right
        h += linalg::kron(&fock::identity(di), &linalg::scaled(&fock::number(dj), c(chain.site_freqs[bond], 0.0)));
    }
    h
}

pub fn build_gates(params: &SystemParams, chain: &ChainCoefficients, config: &SimulationConfig) -> Result<GateSet> {
    config.validate()?;
    params.validate()?;
    if chain.n_sites() != config.n_sites {
        return Err(Error::InvalidParameter(format!(
            "chain has {} sites but the configuration asks for {}",
            chain.n_sites(),
            config.n_sites
        )));
    }
    let mut odd = Vec::new();
    let mut even = Vec::new();
    for bond in 0..config.n_sites - 1 {
        let dims = (config.site_dim(bond), config.site_dim(bond + 1));
        let h = bond_hamiltonian(params, chain, config, bond);
        if bond % 2 == 0 {
            odd.push(TwoSiteGate::from_hamiltonian(bond, dims, &h, 0.5 * config.dt)?);
        } else {
            even.push(TwoSiteGate::from_hamiltonian(bond, dims, &h, config.dt)?);
        }
    }
    Ok(GateSet { dt: config.dt, odd, even })
}

/// Discarded weight per step above which the canonical form is rebuilt.
const RECANONICALIZE_THRESHOLD: f64 = 1e-20;

/// One step `F(δt/2) G(δt) F(δt/2)`.
///
/// Truncation leaves site tensors only approximately right-canonical, so a
/// step that discarded weight ends with [`MpsState::recanonicalize`].
pub fn trotter_step(state: &mut MpsState, gates: &GateSet) -> Result<()> {
    let before = state.trunc_error();
    for g in gates.odd.iter().chain(&gates.even).chain(&gates.odd) {
        state.apply_gate(g)?;
    }
    if state.trunc_error() - before > RECANONICALIZE_THRESHOLD {
        state.recanonicalize()?;
    }
    Ok(())
}

/// Observation of the system site during a run.
#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    #[serde(skip)]
    pub rho: FockDensityMatrix,
    pub trunc_error: f64,
    pub max_bond_dim: usize,
}

/// Runs `config.n_steps()` Trotter steps, recording the system state at
/// `t = 0`, every `snapshot_stride` steps, and after the final step.
pub fn evolve<F>(state: &mut MpsState, gates: &GateSet, config: &SimulationConfig, mut observer: F) -> Result<Vec<Snapshot>>
where
    F: FnMut(&Snapshot),
{
    config.validate()?;
    let n_steps = config.n_steps();
    let snap = |state: &MpsState, step: usize| -> Result<Snapshot> {
        Ok(Snapshot {
            step,
            t: step as f64 * config.dt,
            rho: state.reduced_density_matrix(0)?,
            trunc_error: state.trunc_error(),
            max_bond_dim: state.max_bond_dim(),
        })
    };
    let first = snap(state, 0)?;
    observer(&first);
    let mut out = vec![first];
    for step in 1..=n_steps {
        trotter_step(state, gates)?;
        if step % config.snapshot_stride == 0 || step == n_steps {
            let s = snap(state, step)?;
            observer(&s);
            out.push(s);
        }
    }
    Ok(out)
}
