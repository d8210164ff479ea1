use thiserror::Error;

/// Errors produced by the exploration library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid super-arm: {0}")]
    InvalidSuperArm(String),

    #[error("invalid decision class: {0}")]
    InvalidDecisionClass(String),

    #[error("matroid independence oracle is inconsistent: {0}")]
    InconsistentMatroid(String),

    #[error("decision class has a single feasible super-arm; nothing to exclude")]
    ExclusionImpossible,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("matrix is singular (numeric rank {rank} of {n})")]
    Singular { rank: usize, n: usize },

    #[error("matrix is not positive definite (lambda_min = {lambda_min:e})")]
    NotPositiveDefinite { lambda_min: f64 },

    #[error(
        "power iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("enumeration budget exceeded: {count} candidates > budget {budget}")]
    BudgetExceeded { count: f64, budget: f64 },

    #[error("support does not span R^{n} (rank {rank}); design is not identifiable")]
    NonIdentifiable { rank: usize, n: usize },

    #[error("confidence radius undefined: {0}")]
    RadiusUndefined(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
