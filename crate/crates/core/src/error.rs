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
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("input is empty: {0}")]
    Empty(String),
    #[error("label column {0} not found")]
    MissingLabelColumn(String),
    #[error("cell at row {row}, column {column} is not parseable: {value:?}")]
    UnparseableCell {
        row: usize,
        column: usize,
        value: String,
    },
    #[error("cell at row {row}, column {column} is not finite")]
    NonFiniteCell { row: usize, column: usize },
    #[error("dataset has a single class; at least two are required")]
    SingleClass,
    #[error("class {class} has {count} members; at least {required} are required")]
    ClassTooSmall {
        class: usize,
        count: usize,
        required: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid configuration: {0}")]
    InvalidSpec(String),
    #[error("covariance of class {class} is not positive definite")]
    NotPositiveDefinite { class: usize },
    #[error("metric mismatch: {0} vs {1}")]
    MetricMismatch(&'static str, &'static str),
    #[error("vulnerability is undefined when test performance is zero")]
    UndefinedVulnerability,
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("checksum mismatch for {path}: expected {expected}, got {actual}")]
    Checksum {
        path: PathBuf,
        expected: String,
        actual: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
