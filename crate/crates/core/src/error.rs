//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by dataset handling, model fitting, and persistence.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    /// A file could not be parsed. `line` is 1-based and refers to the input file.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// An argument violated an operation's contract.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Row width, dimension count, or class count did not match the model.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
