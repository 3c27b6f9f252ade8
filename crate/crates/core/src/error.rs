//! Crate-wide error type.

use std::path::PathBuf;

/// Errors raised by tensor kernels, model building, data loading, fold
/// planning, metrics, and the experiment runner.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Operand shapes are incompatible for the named operation.
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    /// Input is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller broke an API contract (e.g. labels not one-hot, backward
    /// without a matching forward, mismatched class tables).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A model specification cannot be instantiated.
    #[error("model build error: {0}")]
    Build(String),

    /// The dataset directory layout is unusable.
    #[error("dataset error: {0}")]
    Dataset(String),

    /// An image file could not be decoded.
    #[error("image error for {path}: {reason}")]
    Image { path: PathBuf, reason: String },

    /// Batch generation over an invalid subset.
    #[error("data error: {0}")]
    Data(String),

    /// A cross-validation plan cannot be constructed.
    #[error("fold plan error: {0}")]
    Plan(String),

    /// An optimizer step was rejected.
    #[error("optimizer error: non-finite gradient in parameter '{0}'")]
    NonFiniteGrad(String),

    /// Configuration file or flag problem.
    #[error("config error: {0}")]
    Config(String),

    /// Checkpoint container problem.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error for {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
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

pub type Result<T> = std::result::Result<T, Error>;
