use thiserror::Error;

#[derive(Debug, Error)]
pub enum UpliftError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("validation error at row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("model format error: {0}")]
    Format(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, UpliftError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(UpliftError::Validation(msg.into()))
}
