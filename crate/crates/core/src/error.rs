use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the embedding pipeline.
#[derive(Debug, Error)]
pub enum PfeError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index ({row}, {col}) out of range for a {n_rows}x{n_cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },

    #[error("matrix is not positive definite: pivot {pivot:e} at row {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("non-finite values in {stage} at iteration {iteration}")]
    Divergence { stage: &'static str, iteration: usize },

    #[error("channel {0} is identically zero")]
    DegenerateChannel(usize),

    #[error("factorization does not match the requested system: {0}")]
    ContractViolation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed file: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl PfeError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PfeError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        PfeError::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// True for caller mistakes (bad flags, inconsistent inputs) as opposed to
    /// I/O or numerical failures.
    pub fn is_usage(&self) -> bool {
        matches!(self, PfeError::Config(_))
    }
}

pub type Result<T, E = PfeError> = std::result::Result<T, E>;
