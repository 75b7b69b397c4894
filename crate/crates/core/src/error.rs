//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by matrix kernels, model math, training, data loading,
/// and evaluation.
#[derive(Debug, Error)]
pub enum FaeError {
    /// Incompatible shapes passed to an operation.
    #[error("dimension mismatch in {op}: {details}")]
    DimensionMismatch { op: &'static str, details: String },

    /// An argument violated an operation's contract (e.g. `k > m`).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numerical failure: singular factorization, non-finite value, etc.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Training loss exploded past the divergence guard.
    #[error("training diverged at epoch {epoch}: total {total:.6e} exceeds {limit:.6e} (1e6 x initial {initial:.6e})")]
    Diverged {
        epoch: usize,
        total: f64,
        initial: f64,
        limit: f64,
    },

    /// Malformed input file.
    #[error("parse error in {path} (line {line}): {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FaeError>;

impl FaeError {
    pub(crate) fn dim(op: &'static str, details: impl Into<String>) -> Self {
        FaeError::DimensionMismatch {
            op,
            details: details.into(),
        }
    }
}
