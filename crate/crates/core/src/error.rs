use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing manifest: {0}")]
    MissingManifest(PathBuf),

    #[error("malformed manifest at line {line}: {reason}")]
    Manifest { line: usize, reason: String },

    #[error("malformed PPM image {path}: {reason}")]
    Ppm { path: PathBuf, reason: String },

    #[error("label {label:?} is not in the vocabulary")]
    UnknownLabel { label: String },

    #[error("image dimensions {found:?} do not match dataset shape {expected:?}")]
    DimensionMismatch {
        expected: (usize, usize, usize),
        found: (usize, usize, usize),
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("client {0} has an empty shard")]
    EmptyShard(usize),

    #[error("config error at row {row}: {reason}")]
    Config { row: usize, reason: String },

    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
