use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {reason}")]
    Record { line: usize, reason: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("missing upstream artifact `{artifact}`; run `{stage}` first")]
    MissingDependency { stage: String, artifact: String },

    #[error("missing input {what} at {path}")]
    MissingInput { what: String, path: PathBuf },

    #[error("stale artifact `{artifact}` (config hash {found}, expected {expected}); re-run `{stage}`")]
    StaleArtifact {
        stage: String,
        artifact: String,
        found: String,
        expected: String,
    },

    #[error("unknown task `{0}`")]
    UnknownTask(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("snapshot encoding: {0}")]
    Snapshot(#[from] bincode::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
