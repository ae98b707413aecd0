//! Crate-wide error type.
//!
//! Every fallible operation in the toolkit returns [`Result`]. Variants carry
//! enough context to diagnose the failing input without re-running the
//! computation.

use thiserror::Error;

/// Errors produced by validation, linear algebra, and the conic solver.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// A matrix expected to be Hermitian deviates from its adjoint beyond tolerance.
    #[error("matrix is not Hermitian: max |A - A^dagger| entry is {deviation:.3e}")]
    NotHermitian { deviation: f64 },

    /// Two operands have incompatible dimensions.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A factor shape does not multiply out to the matrix dimension, or an index is out of range.
    #[error("shape mismatch: {reason}")]
    ShapeMismatch { reason: String },

    /// A spectral function required a positive semidefinite input but found a
    /// significantly negative eigenvalue.
    #[error("negative eigenvalue {value:.3e} below the clamping tolerance")]
    NegativeEigenvalue { value: f64 },

    /// A scalar function applied to a spectrum produced a non-finite value.
    #[error("domain error: function of eigenvalue {eigenvalue:.3e} is not finite")]
    DomainError { eigenvalue: f64 },

    /// A vector of probabilities fails to be a distribution.
    #[error("not a probability distribution: {reason}")]
    NotADistribution { reason: String },

    /// A cost matrix fails the metric axioms where a metric is required.
    #[error("cost matrix is not a metric: {reason}")]
    NonMetricCost { reason: String },

    /// A matrix fails the density-operator axioms.
    #[error("not a density operator: {reason}")]
    NotAState { reason: String },

    /// A Kraus family fails to be trace preserving.
    #[error("Kraus family is not trace preserving: max |sum B^dagger B - 1| entry is {deviation:.3e}")]
    NotTracePreserving { deviation: f64 },

    /// A bipartite state fails the required marginal conditions.
    #[error("marginal mismatch: {reason}")]
    MarginalMismatch { reason: String },

    /// A channel does not map the source state to the target state.
    #[error("channel is not a transport plan: max |Phi(sigma) - rho| entry is {deviation:.3e}")]
    NotATransportPlan { deviation: f64 },

    /// A marginal that must be inverted is singular and pseudo-inversion was not requested.
    #[error("marginal is singular (smallest eigenvalue {eigenvalue:.3e}); enable pseudo-inverse mode")]
    SingularMarginal { eigenvalue: f64 },

    /// The conic solver stopped without an optimality certificate.
    #[error("conic solver failed: {status}")]
    SolverFailure { status: crate::conic::SolveStatus },

    /// An iterative numerical kernel failed to converge.
    #[error("numerical failure: {reason}")]
    Numerical { reason: String },

    /// A caller-supplied argument is outside the supported range.
    #[error("invalid argument: {reason}")]
    InvalidArgument { reason: String },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
