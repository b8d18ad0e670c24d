//! Error types shared across the library.

use thiserror::Error;

/// Library-wide error type. Variants are grouped by the process exit code the
/// CLI maps them to: configuration/parameter problems, numerical failures, and
/// file IO problems.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter or configuration (CLI exit code 2).
    #[error("config error: {0}")]
    Config(String),

    /// Numerical failure: solver non-convergence, NaN propagation, degenerate
    /// input geometry (CLI exit code 3).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// File IO or format problem (CLI exit code 4).
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn io(msg: impl Into<String>) -> Self {
        Error::Io(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
