use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("invalid label set: {0}")]
    LabelSet(String),

    #[error("bad magic in {what}: expected {expected:?}")]
    BadMagic { what: &'static str, expected: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("truncated {0}")]
    Truncated(&'static str),

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("validation error in {path}: {reason}")]
    Validation { path: PathBuf, reason: String },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
