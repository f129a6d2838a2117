use thiserror::Error;

/// Errors produced by the solvers and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate eigenbasis at x = {x:?}: 1 + u/E = {value:e}")]
    DegenerateBasis { x: Vec<f64>, value: f64 },

    #[error("domain too small: {mass:e} of the packet mass lies outside the {what} grid (limit {limit:e})")]
    DomainTooSmall {
        what: &'static str,
        mass: f64,
        limit: f64,
    },

    #[error("CFL violation on axis {axis}: number {number:.4} exceeds {limit}")]
    Cfl { axis: usize, number: f64, limit: f64 },

    #[error("non-finite value produced by the source step")]
    NonFinite,

    #[error("misaligned interface: {0}")]
    Misaligned(String),

    #[error("time-level mismatch: {0} vs {1}")]
    TimeLevel(f64, f64),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
