//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("malformed file {path}: {reason}")]
    FileFormat { path: String, reason: String },

    #[error("solver error: {0}")]
    Solver(String),

    #[error("solver protocol error: {reason}\n--- raw solver output ---\n{raw}")]
    SolverProtocol { reason: String, raw: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
