use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = VcdError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum VcdError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error("invalid value: {0}")]
    Value(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("arity error: {0}")]
    Arity(String),
    #[error("incompatible weights: {0}")]
    IncompatibleWeights(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("sample count mismatch: {left} vs {right} samples")]
    SampleCount { left: usize, right: usize },
    #[error("parse error: {0}")]
    Parse(String),
}

impl VcdError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        VcdError::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable name of the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            VcdError::Io { .. } => "io",
            VcdError::Format(_) => "format",
            VcdError::Corrupt(_) => "corrupt",
            VcdError::Value(_) => "value",
            VcdError::DimensionMismatch(_) => "dimension_mismatch",
            VcdError::Arity(_) => "arity",
            VcdError::IncompatibleWeights(_) => "incompatible_weights",
            VcdError::Config(_) => "config",
            VcdError::Shape(_) => "shape",
            VcdError::Domain(_) => "domain",
            VcdError::SampleCount { .. } => "sample_count",
            VcdError::Parse(_) => "parse",
        }
    }
}
