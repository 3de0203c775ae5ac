use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while reading IDX files.
#[derive(Debug, Error)]
pub enum IdxError {
    #[error("{path}: bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },
    #[error("{path}: truncated file, expected {expected} bytes but found {found}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("value {0} is not a point of the support")]
    NotOnSupport(f64),
    #[error("indicator vector is not monotone non-increasing")]
    NonMonotone,
    #[error("degenerate support: {0}")]
    DegenerateSupport(String),
    #[error("exact evaluation is only available for finite hypothesis classes")]
    ExactUnsupported,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no data points")]
    EmptyData,
    #[error(transparent)]
    Idx(#[from] IdxError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
