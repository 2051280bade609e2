//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes do not conform to the operation's requirements.
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    /// An index (segment id, row id, edge endpoint) is out of range.
    #[error("index out of range: {0}")]
    Index(String),

    /// A caller broke an API precondition (empty batch, non-scalar loss, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Input data failed a domain validation (mask out of [0,1], bad permutation, ...).
    #[error("validation failed: {0}")]
    Validation(String),

    /// A computation produced or encountered a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Input is degenerate for the requested operation (e.g. zero-norm row for cosine).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A serialized record could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A checkpoint or file format version is not supported.
    #[error("incompatible format: {0}")]
    Incompatible(String),

    /// Training aborted because a loss component went non-finite.
    #[error("non-finite loss: {0}")]
    NonFinite(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
