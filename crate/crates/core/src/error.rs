use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: expected side {expected}, found {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("field contains non-finite value at index {0}")]
    NonFinite(usize),

    #[error("degenerate normalizer: {0}")]
    Degenerate(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("payload size mismatch for {file}: expected {expected} bytes, found {found}")]
    SizeMismatch {
        file: String,
        expected: u64,
        found: u64,
    },

    #[error("checksum mismatch: manifest {expected}, payload {found}")]
    ChecksumMismatch { expected: String, found: String },

    #[error("unsupported format version {0}")]
    Version(u32),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("malformed {what}: {detail}")]
    Malformed { what: String, detail: String },

    #[error("missing dataset at {0}")]
    MissingDataset(PathBuf),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("near-singular system: {0}")]
    NearSingular(String),

    #[error("sample {index} failed: {source}")]
    SampleFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("diverged: {0}")]
    Diverged(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
