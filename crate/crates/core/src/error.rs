use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the encode/classify pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape { context: &'static str, expected: String, got: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate matrix: {0}")]
    DegenerateMatrix(String),

    #[error("format error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Format { line: Option<usize>, message: String },

    #[error("training failed: {0}")]
    Training(String),

    #[error("report is missing method `{0}`")]
    MissingMethod(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape { context, expected: expected.to_string(), got: got.to_string() }
    }

    pub(crate) fn format(line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Format { line, message: message.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for failures caused by bad input (files, flags, config) rather
    /// than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parameter(_)
                | Error::Shape { .. }
                | Error::Format { .. }
                | Error::MissingMethod(_)
                | Error::Io { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
