use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the perfusion toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid lesion specification: {0}")]
    InvalidLesion(String),

    #[error("missing parameters for label `{0}`")]
    MissingLabelParams(String),

    #[error("unusable arterial input function: {0}")]
    UnusableAif(String),

    #[error("no valid candidate curve: {0}")]
    NoCandidate(String),

    #[error("missing map `{0}`")]
    MissingMap(&'static str),

    #[error("invalid reference region: {0}")]
    InvalidReference(String),

    #[error("invalid clinical score `{field}`: {reason}")]
    InvalidScore { field: &'static str, reason: String },

    #[error("invalid treatment event: {0}")]
    InvalidEvent(String),

    #[error("invalid survival model: {0}")]
    InvalidModel(String),

    #[error("invalid volume header {path}: field `{field}`: {reason}")]
    Header {
        path: PathBuf,
        field: &'static str,
        reason: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
