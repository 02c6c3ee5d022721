//! Error type shared across the crate.

use std::fmt;

/// Everything that can go wrong while building meshes, factoring matrices or
/// running the interface solvers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Mesh resolutions must be even (the interface lines must land on mesh
    /// lines and the diagonal mirror needs a middle column) and at least 2.
    BadResolution { n: usize, reason: &'static str },
    /// A requested partition does not fit the mesh (interface position or
    /// subdomain count not aligned with the grid).
    BadPartition(String),
    /// A matrix expected to be symmetric positive definite produced a
    /// nonpositive pivot during factorization. `index` is the row at which
    /// elimination failed.
    NotPositiveDefinite { index: usize, pivot: f64 },
    /// The Robin shift gamma*M - S_B is not positive definite, so the Robin
    /// interface system cannot be built. Carries the most negative Ritz value
    /// observed so the caller can see how far off the shift is.
    RobinShiftTooSmall { gamma: f64, min_ritz: f64 },
    /// Conjugate gradients hit a direction of nonpositive curvature, which
    /// means the operator or preconditioner is not positive definite.
    IndefiniteOperator { iteration: usize, curvature: f64 },
    /// A dense materialization was requested above the supported size.
    DimensionCap { dim: usize, cap: usize },
    /// A stationary iteration's predicted rate is >= 1.
    NoConvergencePredicted { rho: f64 },
    /// The dense nonsymmetric eigenvalue iteration hit its step cap without
    /// converging (tightly clustered spectra can stall the QR sweep).
    EigenIterationStalled { dim: usize },
    /// Configuration text or flags could not be parsed.
    Config(String),
    /// Output files could not be written.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::BadResolution { n, reason } => {
                write!(f, "mesh resolution n={n} rejected: {reason}")
            }
            Error::BadPartition(msg) => write!(f, "bad partition: {msg}"),
            Error::NotPositiveDefinite { index, pivot } => write!(
                f,
                "factorization failed: pivot {pivot:.3e} at row {index} is not positive"
            ),
            Error::RobinShiftTooSmall { gamma, min_ritz } => write!(
                f,
                "Robin shift gamma={gamma:.3e} leaves gamma*M - S_B indefinite \
                 (smallest Ritz value {min_ritz:.3e}); increase gamma"
            ),
            Error::IndefiniteOperator { iteration, curvature } => write!(
                f,
                "conjugate gradient breakdown at iteration {iteration}: \
                 search curvature {curvature:.3e} <= 0"
            ),
            Error::DimensionCap { dim, cap } => {
                write!(f, "dense materialization of dimension {dim} exceeds cap {cap}")
            }
            Error::NoConvergencePredicted { rho } => {
                write!(f, "no convergence predicted: spectral radius {rho:.6} >= 1")
            }
            Error::EigenIterationStalled { dim } => {
                write!(f, "eigenvalue iteration stalled on a {dim}x{dim} matrix")
            }
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
