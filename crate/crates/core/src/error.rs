use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A document failed to parse. `line` is 1-based.
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("calibration error: {0}")]
    Calibration(String),

    /// Scenario or config validation failure naming the offending field path.
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("already exists: {0}")]
    AlreadyExists(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("request {0} has not finished")]
    NotFinished(u64),

    /// Simulator invariant broken; indicates a bug rather than bad input.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("watch timed out after {waited_ms} ms waiting for {expected}m{}", step.map(|s| format!(" (step {s})")).unwrap_or_default())]
    WatchTimeout {
        expected: u32,
        waited_ms: u64,
        step: Option<usize>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}
