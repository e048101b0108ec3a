use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0} vs {1}")]
    GridMismatch(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("field is not divergence free (residual {0:e})")]
    NotDivergenceFree(f64),
    #[error("field has nonzero mean ({0:e})")]
    NonzeroMean(f64),
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
    #[error("consistency check failed: {0}")]
    Consistency(String),
    #[error("invalid config: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("malformed data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

