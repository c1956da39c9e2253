use thiserror::Error;

/// Errors raised by the bound calculators, solvers and simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MrdError {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Inconsistent shapes, axes or configuration.
    #[error("usage error: {0}")]
    Usage(String),
    /// An iterative method hit its iteration cap.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e}): {context}")]
    Convergence {
        context: String,
        iterations: usize,
        residual: f64,
    },
    /// A sampled estimate is too noisy for the requested tolerance.
    #[error("sampling budget exceeded: {0}")]
    SamplingBudget(String),
    /// A codebook would not fit in the configured memory budget.
    #[error("memory budget exceeded: {0}")]
    Memory(String),
    /// An enumeration would be too large to carry out.
    #[error("enumeration too large: {0}")]
    Enumeration(String),
}

pub type Result<T> = std::result::Result<T, MrdError>;

pub(crate) fn domain(msg: impl Into<String>) -> MrdError {
    MrdError::Domain(msg.into())
}

pub(crate) fn usage(msg: impl Into<String>) -> MrdError {
    MrdError::Usage(msg.into())
}
