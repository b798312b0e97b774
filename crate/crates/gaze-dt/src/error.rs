//! Error types shared across the crate.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum GazeError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("empty episode")]
    EmptyEpisode,

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("context overflow: window length {got} exceeds context length {max}")]
    ContextOverflow { got: usize, max: usize },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("numeric failure at layer {layer}: {detail}")]
    Numeric { layer: usize, detail: String },

    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),

    #[error("parse error in {path}: {detail}")]
    Parse { path: PathBuf, detail: String },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl GazeError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GazeError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        GazeError::Parse {
            path: path.into(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, GazeError>;
