//! Crate-wide error type.

use std::fmt;

pub type Result<T> = std::result::Result<T, EngineError>;

/// All failure modes of the engine.
///
/// Variants are grouped the way the CLI maps them to exit codes: usage and
/// contract problems, data problems, and numerical problems.
#[derive(Debug)]
pub enum EngineError {
    /// Incompatible shapes handed to a matrix or tape operation.
    Dimension { op: &'static str, detail: String },
    /// A documented precondition was violated by the caller.
    Contract { op: &'static str, detail: String },
    /// An operation produced NaN or infinity.
    NonFinite { op: &'static str },
    /// Training or evaluation aborted for a numerical reason.
    Numerical { detail: String },
    /// Invalid configuration value.
    Config { detail: String },
    /// A mandatory dataset file is missing or unreadable.
    Ingestion { detail: String },
    /// Malformed content in a dataset file.
    Parse {
        file: String,
        line: usize,
        detail: String,
    },
    /// A cross-validation split cannot be built.
    Split { detail: String },
    /// A configured resource bound was exceeded.
    Resource { detail: String },
    /// Checkpoint missing, malformed, or inconsistent with the dataset.
    Checkpoint { detail: String },
    Io(std::io::Error),
    Json(serde_json::Error),
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::Dimension { op, detail } => {
                write!(f, "dimension error in {op}: {detail}")
            }
            EngineError::Contract { op, detail } => {
                write!(f, "contract violation in {op}: {detail}")
            }
            EngineError::NonFinite { op } => {
                write!(f, "non-finite value produced by {op}")
            }
            EngineError::Numerical { detail } => write!(f, "numerical error: {detail}"),
            EngineError::Config { detail } => write!(f, "config error: {detail}"),
            EngineError::Ingestion { detail } => write!(f, "ingestion error: {detail}"),
            EngineError::Parse { file, line, detail } => {
                write!(f, "parse error in {file}:{line}: {detail}")
            }
            EngineError::Split { detail } => write!(f, "split error: {detail}"),
            EngineError::Resource { detail } => write!(f, "resource error: {detail}"),
            EngineError::Checkpoint { detail } => write!(f, "checkpoint error: {detail}"),
            EngineError::Io(e) => write!(f, "io error: {e}"),
            EngineError::Json(e) => write!(f, "json error: {e}"),
        }
    }
}

impl std::error::Error for EngineError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            EngineError::Io(e) => Some(e),
            EngineError::Json(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for EngineError {
    fn from(e: std::io::Error) -> Self {
        EngineError::Io(e)
    }
}

impl From<serde_json::Error> for EngineError {
    fn from(e: serde_json::Error) -> Self {
        EngineError::Json(e)
    }
}

impl EngineError {
    pub fn dimension(op: &'static str, detail: impl Into<String>) -> Self {
        EngineError::Dimension {
            op,
            detail: detail.into(),
        }
    }

    pub fn contract(op: &'static str, detail: impl Into<String>) -> Self {
        EngineError::Contract {
            op,
            detail: detail.into(),
        }
    }

    pub fn config(detail: impl Into<String>) -> Self {
        EngineError::Config {
            detail: detail.into(),
        }
    }
}
