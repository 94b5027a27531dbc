use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spectral field: {0}")]
    InvalidField(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("grid of {grid} points cannot resolve {modes} modes")]
    GridTooSmall { grid: usize, modes: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("blow-up at step {step}{}: |x|_H = {norm:e}", member.map(|m| format!(" of member {m}")).unwrap_or_default())]
    BlowUp {
        member: Option<usize>,
        step: usize,
        norm: f64,
    },

    #[error("exponential overflow evaluating the jump cumulant at lambda = {lambda:e}")]
    Overflow { lambda: f64 },

    #[error("dissipativity constant K = {0} is not positive")]
    NonPositiveK(f64),

    #[error("input is not convex on the evaluation grid: {0}")]
    NonConvex(String),

    #[error("empirical measures have unequal sizes ({0} vs {1})")]
    UnequalSizes(usize, usize),

    #[error("{requested} points exceed the assignment solver cap of {cap}; thin the sample first")]
    TooLarge { requested: usize, cap: usize },

    #[error("time grids differ")]
    GridMismatch,

    #[error("direction of a linear observable must be non-zero")]
    ZeroDirection,

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed curve file: {0}")]
    Curve(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
