use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the model, tuners and data loaders.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty window")]
    EmptyWindow,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hyperparameter index {index} is not a kernel hyperparameter (kernel dimension {kernel_dim})")]
    NotAKernelHyperparameter { index: usize, kernel_dim: usize },

    #[error("cholesky factorization of K + ridge*I failed with ridge = {ridge}")]
    Factorization { ridge: f64 },

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("stream too short: need at least {needed} samples, have {available}")]
    StreamTooShort { needed: usize, available: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by input data rather than configuration or numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(self, Error::Data(_) | Error::Csv { .. } | Error::Io(_) | Error::StreamTooShort { .. })
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Factorization { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
