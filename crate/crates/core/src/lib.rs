//! Simulation and analysis of a coherently driven, dissipative Kerr oscillator.
//!
//! The oscillator couples to a flat-band zero-temperature reservoir. The
//! reservoir is mapped onto a semi-infinite hopping chain and the full
//! system + chain is evolved with second-order TEBD on a matrix product
//! state. Two independent references are provided: the closed-form quantum
//! steady state (built on `0F2` hypergeometric moments) and a fixed-step
//! Lindblad integrator in a truncated Fock basis.
//!
//! Units: every frequency is expressed in units of `g` (the inverse density
//! of bath states) and every time in units of `1/g`.
//!
//! ```text
//!  system        bath chain
//!   [a] --η'-- [b0] --η0-- [b1] --η1-- ... --η_{N-3}-- [b_{N-2}]
//!  site 0      site 1      site 2                      site N-1
//! ```

pub mod analytic;
pub mod chain;
pub mod error;
pub mod fock;
mod linalg;
pub mod lindblad;
pub mod model;
pub mod mps;
pub mod observables;

pub use analytic::{
    hyp0f2, moment_g, steady_density_matrix, steady_field, steady_g2, steady_photon_number,
    steady_wigner, MomentTable,
};
pub use chain::{build_chain, verify_legendre_orthonormality, ChainCoefficients};
pub use error::{Error, Result};
pub use lindblad::{
    integrate, lindblad_rhs, steady_state_longtime, LindbladConfig, LindbladTrajectory, LongTimeState,
};
pub use model::{
    bistable_drive_interval, is_bistable, semiclassical_branches, semiclassical_drive_for_field,
    turning_points, InitialState, SimulationConfig, SystemParams,
};
pub use mps::{build_gates, evolve, init_state, trotter_step, GateSet, MpsState, Snapshot, TwoSiteGate};
pub use observables::{
    closest_gaussian_moments, fidelity_to_classical, g2_zero, mean_field, non_gaussianity,
    photon_number, wigner_at, wigner_displaced_parity, FockDensityMatrix, GaussianMoments, GridSpec, WignerGrid,
};

pub use num_complex::Complex64;
