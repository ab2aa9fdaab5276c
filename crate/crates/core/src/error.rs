use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("question generation failed for chunk {chunk_id}: {message}")]
    Generation { chunk_id: String, message: String },

    #[error("embedding failed for batch indices {indices:?}: {message}")]
    Embedding { indices: Vec<usize>, message: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("duplicate document key: {0}")]
    DuplicateKey(String),

    #[error("index is empty")]
    EmptyIndex,

    #[error("index corrupt ({}): {message}", file.display())]
    IndexCorrupt { file: PathBuf, message: String },

    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),

    #[error("hyde generation failed: {0}")]
    Hyde(String),

    #[error("failed to load {}: {message}", path.display())]
    Load { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn load(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Load {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn corrupt(file: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::IndexCorrupt {
            file: file.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure reported by a remote or mock backend for a single call.
#[derive(Debug, Clone, Error)]
pub enum BackendError {
    /// Network or server-side failure that may succeed on retry.
    #[error("transport: {0}")]
    Transport(String),
    /// The backend answered but the response could not be used.
    #[error("protocol: {0}")]
    Protocol(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport(_))
    }
}
