use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite point at index {index}")]
    NonFinitePoint { index: usize },

    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("cannot fit a box to an empty point set")]
    EmptyPointSet,

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("zero-norm vector")]
    ZeroNorm,

    #[error("query list is empty")]
    EmptyQueries,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("ground fit failed: {0}; fall back to a height threshold")]
    GroundFit(String),

    #[error("scene flow needs a neighboring frame: {0}")]
    MissingNeighborFrame(String),

    #[error("covariance is not symmetric positive semidefinite")]
    NotPsd,

    #[error("{0}")]
    Pipeline(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: unsupported manifest version {found} (expected {expected})")]
    Version {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("{path}: size mismatch: expected {expected} bytes, found {found}")]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
