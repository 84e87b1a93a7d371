//! Crate-wide error type.
//!
//! Variants are grouped so a caller (notably the CLI) can map them onto an
//! exit-code taxonomy: file/parse problems versus numeric or degenerate
//! conditions discovered at compute time.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file; reports the offending line (1-based).
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Underlying I/O failure, annotated with the path involved.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A token was looked up but is not part of the vocabulary.
    #[error("unknown token `{0}`")]
    UnknownToken(String),

    /// A token appeared twice while building a vocabulary.
    #[error("duplicate token `{0}`")]
    DuplicateToken(String),

    /// A row that must be normalized has length zero.
    #[error("zero vector for token `{0}`")]
    ZeroVector(String),

    /// Numeric or degenerate condition (undefined correlation, empty label
    /// set, bad sample size, ...).
    #[error("{0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn parse(path: &std::path::Path, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// True for errors caused by unreadable or malformed inputs, as opposed
    /// to numeric conditions; the CLI uses this split for exit codes.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Numeric(_))
    }
}
