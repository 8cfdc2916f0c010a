use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the parser toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// Malformed treebank, score or embedding file.
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    /// A caller violated an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Non-finite loss or gradient.
    #[error("numeric error in sentence {sentence}: {message}")]
    Numeric { sentence: String, message: String },

    /// Checkpoint and vocabulary/shape mismatches.
    #[error("model error: {0}")]
    Model(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
