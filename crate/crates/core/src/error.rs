use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation's input contract (shape, range, kind).
    #[error("rejected input: {0}")]
    InvalidInput(String),
    /// An experiment or generator configuration is invalid.
    #[error("configuration error: {0}")]
    Config(String),
    /// An operation was called before its state was ready.
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// Training produced NaN or infinite parameters.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A text document (checkpoint, CSV) could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
