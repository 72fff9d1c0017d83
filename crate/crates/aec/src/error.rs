//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Text-format parse failure, with the 1-based line it occurred on.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Invalid configuration or precondition violation.
    #[error("{0}")]
    Invalid(String),

    /// Array shapes do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A vector that must have spread is constant.
    #[error("zero-variance {role} at index {index}")]
    ZeroVariance { role: &'static str, index: usize },

    /// A computation produced NaN or infinity.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Filesystem failure, with the offending path.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A pipeline stage failed; wraps the underlying error with the stage name.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    /// Report or serialization decoding failure.
    #[error("decode: {0}")]
    Decode(String),
}

impl Error {
    /// Wrap this error with the pipeline stage it happened in.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Extension for attaching stage labels to results flowing through the pipeline.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
