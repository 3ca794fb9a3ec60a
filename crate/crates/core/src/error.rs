use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty embedding")]
    EmptyEmbedding,

    #[error("non-finite embedding component at position {0}")]
    NonFinite(usize),

    #[error("zero-norm embedding")]
    ZeroNorm,

    #[error("unknown image id {0:?}")]
    UnknownImage(String),

    #[error("cluster id {cluster} out of range for k = {k}")]
    ClusterOutOfRange { cluster: usize, k: usize },

    #[error("invalid k = {k} for {n} items")]
    InvalidK { k: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("segment {0:?} has no topics")]
    NoTopics(String),

    #[error("no image in gallery {0:?} passes the segment filter")]
    NoRelevantImages(String),

    #[error("missing embedding for topic {0:?}")]
    MissingTopicEmbedding(String),

    #[error("invalid workspace: {0}")]
    InvalidWorkspace(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
