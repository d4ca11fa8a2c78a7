use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error("{op}: shape mismatch ({left_rows}x{left_cols} vs {right_rows}x{right_cols})")]
    Shape {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("matrix data length {len} does not match {rows}x{cols}")]
    DataLength { rows: usize, cols: usize, len: usize },
    #[error("backward requires a 1x1 root, got {rows}x{cols}")]
    NonScalarRoot { rows: usize, cols: usize },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("{0}")]
    Contract(String),
}

impl DiffError {
    pub(crate) fn shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        DiffError::Shape {
            op,
            left_rows: left.0,
            left_cols: left.1,
            right_rows: right.0,
            right_cols: right.1,
        }
    }
}
