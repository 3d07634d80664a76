use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
///
/// The variants split into two groups: input problems (`Load`, `Validation`,
/// `Config`, `Argument`) and failures during a run (`Degenerate`, `Training`,
/// `Run`). [`Error::is_input_error`] makes that split available to callers
/// that map errors onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to load {}: {reason}", path.display())]
    Load { path: PathBuf, reason: String },

    #[error("record `{id}` is invalid: {reason}")]
    Validation { id: String, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("run failed: {0}")]
    Run(String),

    /// Every fold of every evaluated candidate failed; carries the trace so
    /// callers can dump it.
    #[error("run failed: {reason}")]
    RunWithTrace {
        reason: String,
        trace: Box<serde_json::Value>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Load { .. }
                | Error::Validation { .. }
                | Error::Config(_)
                | Error::Argument(_)
                | Error::Json(_)
        )
    }

    pub(crate) fn load(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::Load {
            path: path.into(),
            reason: reason.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
