//! Crate-wide error type.

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::model::MetaError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("input not found: {path}")]
    NotFound { path: PathBuf },

    #[error("empty input: {path}")]
    EmptyInput { path: PathBuf },

    /// Malformed edge-list record; `line` is 1-based for text inputs and a
    /// record index for binary inputs.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}:{line}: vertex id overflow")]
    IdOverflow { path: PathBuf, line: u64 },

    #[error("invalid graph metadata: {0}")]
    Meta(#[from] MetaError),

    /// A shard or metadata file failed structural validation on read.
    #[error("corrupt file {path}: {message}")]
    Corrupt { path: PathBuf, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An update function panicked; the engine reports where.
    #[error("update function panicked at shard {shard_id}, vertex {vertex}: {message}")]
    UpdatePanic {
        shard_id: u32,
        vertex: u64,
        message: String,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn corrupt(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Corrupt {
            path: path.into(),
            message: message.into(),
        }
    }
}
