//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or configuration value is outside its legal range.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Input data violates a structural requirement (ragged rows, bad labels, ...).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A CSV cell could not be interpreted.
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("array shapes incompatible: {0}")]
    DimensionMismatch(String),

    /// Too few samples for the requested conditional independence test.
    #[error("insufficient samples: test needs n >= {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    /// Covariance submatrix stayed singular even after ridge regularization.
    #[error("covariance matrix of size {size} is singular after ridge regularization")]
    SingularCovariance { size: usize },

    /// SGD training blew up (non-finite factors or runaway RMSE).
    #[error("latent factor training diverged at epoch {epoch}")]
    Divergence { epoch: usize },

    /// The cost matrix collapses the boundary region (beta >= alpha).
    #[error("degenerate costs: thresholds alpha = {alpha}, beta = {beta} do not satisfy beta < alpha")]
    DegenerateCosts { alpha: f64, beta: f64 },

    /// No features were selected; callers should fall back to
    /// majority-class prediction explicitly.
    #[error("empty feature set: fall back to majority-class prediction")]
    EmptyFeatureSet,
}

/// Coarse grouping used by the CLI to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad flags or parameter combinations (exit code 1).
    Usage,
    /// Problems with the input data or filesystem (exit code 2).
    Data,
    /// Numerical failures during computation (exit code 3).
    Numeric,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidConfig(_) | Error::DegenerateCosts { .. } => ErrorCategory::Usage,
            Error::InvalidData(_)
            | Error::Parse { .. }
            | Error::Io { .. }
            | Error::DimensionMismatch(_)
            | Error::EmptyFeatureSet => ErrorCategory::Data,
            Error::InsufficientSamples { .. }
            | Error::SingularCovariance { .. }
            | Error::Divergence { .. } => ErrorCategory::Numeric,
        }
    }
}
