//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by dataset loading, simulation, training, and reporting.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed file contents: bad magic, truncation, corrupt bundle.
    #[error("format error: {0}")]
    Format(String),

    /// Internally inconsistent inputs: count mismatches, index out of range.
    #[error("consistency error: {0}")]
    Consistency(String),

    /// Parameter outside its valid domain.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Non-finite value where a finite one is required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Configuration document rejected by schema validation.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
    pub fn consistency(msg: impl Into<String>) -> Self {
        Error::Consistency(msg.into())
    }
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
    pub fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }
}
