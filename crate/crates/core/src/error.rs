use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("data matrix must have at least one row and one column (got {rows}x{cols})")]
    EmptyData { rows: usize, cols: usize },

    #[error("buffer length {len} does not match {rows}x{cols}")]
    ShapeMismatch { len: usize, rows: usize, cols: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("k = {k} exceeds the number of points m = {m}")]
    TooFewPoints { k: usize, m: usize },

    #[error("sample size {s} is outside [1, {m}]")]
    InvalidSampleSize { s: usize, m: usize },

    #[error("no degenerate centroids to reseed")]
    NothingToReseed,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("reference objective must be positive, got {0}")]
    NonPositiveReference(f64),

    #[error("no worker produced an incumbent before the time budget expired")]
    NoIncumbent,

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{0}: file contains no data rows")]
    EmptyFile(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
