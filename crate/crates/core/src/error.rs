//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Shape or schema mismatch (wrong dimensions, incompatible datasets).
    #[error("structural error: {0}")]
    Structural(String),
    /// Non-finite values encountered during evaluation.
    #[error("numeric error at {context}: {detail}")]
    Numeric { context: String, detail: String },
    /// Argument outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Invalid or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),
    /// Malformed persisted artifact (weights file, CSV, manifest).
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl Error {
    pub fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub fn numeric(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Numeric {
            context: context.into(),
            detail: detail.into(),
        }
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
