use thiserror::Error;

/// Errors shared across the crate.
///
/// Variants are grouped by the exit-code class the CLI maps them to:
/// input problems (bad files, bad dimensions, bad parameters), numerical
/// failures (Newton breakdown, norm drift), and resource-budget violations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry at {0}")]
    NonFinite(String),

    #[error("normalization violated in strict mode: {0}")]
    NormViolation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("homogenizing variable beta = {beta:.3e} is below threshold {threshold:.3e}; instance has no solution with beta > 0")]
    BetaBelowThreshold { beta: f64, threshold: f64 },

    #[error("Newton iteration limit ({0}) exceeded; residual {1:.3e}")]
    NewtonMaxIter(usize, f64),

    #[error("Jacobian numerically singular (condition estimate {0:.3e})")]
    SingularJacobian(f64),

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("memory budget exceeded: grid needs {needed} complex entries, budget {budget}")]
    MemoryBudget { needed: u128, budget: u128 },

    #[error("norm drift {0:.3e} exceeds 1e-6; time step too large")]
    NormDrift(f64),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
