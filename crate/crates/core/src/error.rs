use thiserror::Error;

/// Errors raised anywhere in the simulation stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature with {points} points cannot integrate polynomials of degree {degree} exactly (need at least {required} points)")]
    UnderResolvedQuadrature {
        points: usize,
        degree: usize,
        required: usize,
    },

    #[error("coherent state |α|={amplitude} loses {lost:.3e} of its norm at local_dim {local_dim}; use local_dim >= {required}")]
    CoherentTruncation {
        amplitude: f64,
        local_dim: usize,
        lost: f64,
        required: usize,
    },

    #[error("assembled two-site Hamiltonian on bond {bond} is not Hermitian (deviation {deviation:.3e})")]
    NonHermitianHamiltonian { bond: usize, deviation: f64 },

    #[error("gate on bond {bond} failed the unitarity check (deviation {deviation:.3e})")]
    NonUnitaryGate { bond: usize, deviation: f64 },

    #[error("singular value decomposition failed on bond {bond}")]
    SvdFailure { bond: usize },

    #[error("eigendecomposition failed: {0}")]
    EigenFailure(String),

    #[error("canonical form violated at site {site} (deviation {deviation:.3e}); re-orthogonalize the state")]
    CanonicalFormViolated { site: usize, deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("g2(0) is undefined for vanishing occupation <n> = {0:.3e}")]
    UndefinedG2(f64),

    #[error("unphysical covariance: symplectic eigenvalue {0} below the Heisenberg bound")]
    UnphysicalCovariance(f64),

    #[error("hypergeometric parameter {0} is a pole (non-positive integer)")]
    HypergeometricPole(String),

    #[error("series did not converge within {0} terms")]
    SeriesNotConverged(usize),

    #[error("the analytic steady state requires a real positive drive, got {0}")]
    ComplexDrive(String),

    #[error("{0}")]
    Truncation(String),

    #[error("Lindblad integration lost positivity at t = {time} (min eigenvalue {min_eigenvalue:.3e}); reduce dt or increase the Fock dimension")]
    PositivityLost { time: f64, min_eigenvalue: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
