use std::path::PathBuf;

use thiserror::Error;

/// Failure reported by an adapter implementation.
///
/// Adapters wrap external systems whose errors we cannot enumerate, so this
/// only carries a message. Callers attach stage context when surfacing it.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{0}")]
pub struct AdapterError(pub String);

impl AdapterError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

impl From<std::io::Error> for AdapterError {
    fn from(e: std::io::Error) -> Self {
        Self(e.to_string())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A value failed its type invariants.
    #[error("validation error: {0}")]
    Validation(String),

    /// Configuration is inconsistent (bad adapter pairing, unsupported mode, schema).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{stage} failed for {context}: {source}")]
    Stage {
        stage: &'static str,
        context: String,
        #[source]
        source: AdapterError,
    },

    #[error("could not acquire {uri}: {reason}")]
    Acquisition { uri: String, reason: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("cannot decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("no audio in {0}")]
    EmptyAudio(PathBuf),

    /// On-disk container is malformed or missing required content.
    #[error("format error: {0}")]
    Format(String),

    #[error("{file}:{line}: {message}")]
    Parse {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("cannot write record: {0}")]
    Writer(String),

    #[error("no {role} adapter with id {id:?} (available: {available})")]
    Lookup {
        role: String,
        id: String,
        available: String,
    },

    #[error("registry error: {0}")]
    Registry(String),

    /// Every item of a batch failed.
    #[error("all {} batch items failed: {}", .0.len(), .0.join("; "))]
    BatchFailed(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn stage(stage: &'static str, context: impl Into<String>, source: AdapterError) -> Self {
        Error::Stage {
            stage,
            context: context.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 for configuration problems, 2 for
    /// everything that fails while doing work.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Lookup { .. } | Error::Registry(_) => 1,
            _ => 2,
        }
    }
}
