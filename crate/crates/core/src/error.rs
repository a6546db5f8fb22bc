use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("ingestion error: {0}")]
    Ingest(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("checkpoint version {found:?} is not supported (expected {expected:?}); refusing to upgrade")]
    Version { found: String, expected: &'static str },

    #[error("non-finite gradient in parameter `{param}` at ({row}, {col})")]
    NonFinite { param: String, row: usize, col: usize },

    #[error("stale forward cache: parameters changed since the forward pass")]
    StaleCache,

    #[error("vocabulary hash mismatch: checkpoint expects {expected}, found {found}")]
    VocabMismatch { expected: String, found: String },

    #[error("incompatible model: {0}")]
    Incompatible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
