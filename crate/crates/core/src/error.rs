use std::path::PathBuf;

use diffcore::DiffError;
use thiserror::Error;

pub type Result<T, E = BdclError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum BdclError {
    #[error("config error: {0}")]
    Config(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("{component}: {source}")]
    Loss {
        component: &'static str,
        #[source]
        source: DiffError,
    },
    #[error("non-finite {component} during {phase} epoch {epoch}")]
    NonFiniteLoss {
        component: &'static str,
        phase: &'static str,
        epoch: usize,
    },
    #[error("checkpoint not found: {0}")]
    CheckpointMissing(PathBuf),
    #[error("checkpoint format tag or version not supported: {0}")]
    CheckpointVersion(String),
    #[error("checkpoint corrupted: {0}")]
    CheckpointCorrupted(String),
    #[error("missing view file {0}")]
    MissingViewFile(PathBuf),
    #[error("{file}: expected {expected} rows, found {found}")]
    RowCount {
        file: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("{file}: expected {expected} columns, found {found}")]
    ColumnCount {
        file: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("label {label} at row {row} is outside [0, {k})")]
    LabelRange { label: i64, row: usize, k: usize },
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("incompatible checkpoint and dataset: {0}")]
    Compatibility(String),
    #[error("metric error: {0}")]
    Metric(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl BdclError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BdclError::Io {
            path: path.into(),
            source,
        }
    }
}
