use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by model construction, solvers, data ingestion and the
/// experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition of an operation was not met (shape mismatch, invalid
    /// parameter, empty task, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A numerical routine produced a non-finite value or failed to converge.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Malformed input file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Brute-force enumeration would exceed the configured budget.
    #[error("combinatorial cap exceeded: {count} support sets requested, cap is {cap}")]
    CapExceeded { count: u128, cap: u128 },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Invalid experiment configuration (unknown key, bad value, ...).
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
