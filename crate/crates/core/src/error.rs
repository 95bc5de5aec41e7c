use thiserror::Error;

/// Errors raised by the polykin library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A candidate pair rate exceeded the per-pair majorant used for null-collision selection.
    #[error("majorant violated: pair rate {rate} exceeds majorant {majorant} at step {step}")]
    MajorantViolation { rate: f64, majorant: f64, step: usize },

    /// A particle state became NaN or infinite.
    #[error("non-finite particle state at step {step}: {dump}")]
    NonFinite { step: usize, dump: String },

    /// Fewer particles or samples than the operation requires.
    #[error("insufficient data: {0}")]
    Insufficient(String),

    /// Both exchange and frozen rates vanish, so no collision can be sampled.
    #[error("zero collision rate")]
    ZeroRate,

    #[error("bundled data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
