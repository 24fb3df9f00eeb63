//! Error type shared by every module.

use thiserror::Error;

/// Failure modes of the numerical and symbolic operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input violates a structural requirement (degree, shape, trace).
    #[error("malformed input: {0}")]
    MalformedInput(String),
    /// A documented precondition of the operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// Jet arithmetic produced coefficients beyond the overflow guard.
    #[error("divergence: {0}")]
    Divergence(String),
    /// The adaptive integrator could not reach the requested tolerance.
    #[error("integration failure: {0}")]
    Integration(String),
    /// The ansatz system of the Pinkall-Sterling iteration is inconsistent.
    #[error("iteration failure: {0}")]
    IterationFailure(String),
    /// A Killing field left the reality class along a flow.
    #[error("reality loss: {0}")]
    RealityLoss(String),
    /// Least-squares recovery of the spectral polynomial `b` failed.
    #[error("curve recovery: {0}")]
    CurveRecovery(String),
    /// A contour passes too close to a branch point.
    #[error("path error: {0}")]
    Path(String),
    /// The spectral pair is degenerate (common or colliding roots).
    #[error("degenerate pair: {0}")]
    Degenerate(String),
    /// A deformation reached the numeric boundary of the moduli space.
    #[error("boundary of moduli: {0}")]
    BoundaryOfModuli(String),
    /// A computed loop does not have the expected coefficient pattern.
    #[error("structure error: {0}")]
    Structure(String),
    /// Generic numerical failure (finite differences, rank loss).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for errors caused by bad input rather than by numerics.
    pub fn is_malformed(&self) -> bool {
        matches!(self, Error::MalformedInput(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
