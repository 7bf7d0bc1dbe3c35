use thiserror::Error;

/// Errors raised across the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid rates: {0}")]
    Rates(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("inactive move: pair ({0}, {1}) has no admissible transition")]
    InactiveMove(i8, i8),

    #[error("state space too large: {states} states exceeds cap {cap}")]
    StateSpaceTooLarge { states: u128, cap: u128 },

    #[error("generator is reducible: {components} communicating classes")]
    Reducible { components: usize },

    #[error("rejection sampling failed after {0} attempts")]
    RejectionBudget(u64),

    #[error("event budget of {0} exceeded")]
    EventBudget(u64),

    #[error("CFL violation: dt = {dt} exceeds stable bound {bound}")]
    Cfl { dt: f64, bound: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("drift check failed: {0}")]
    DriftCheck(String),

    #[error("linear solver did not converge: {0}")]
    Solver(String),

    #[error("test function is not mean zero under canonical measures (max |mean| = {0:.3e})")]
    NotMeanZero(f64),

    #[error("comparison bound violated: ratio {ratio} > bound {bound}")]
    ComparisonViolated { ratio: f64, bound: f64 },

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
