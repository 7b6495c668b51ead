use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CrbmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CrbmError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("candidate set is empty")]
    EmptyCandidates,

    #[error("output space of {0} visible units is too large to enumerate")]
    TooLargeToEnumerate(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("malformed {kind} data: {message}")]
    Format { kind: &'static str, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CrbmError {
    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        CrbmError::InvalidArgument(message.into())
    }

    pub(crate) fn format(kind: &'static str, message: impl Into<String>) -> Self {
        CrbmError::Format {
            kind,
            message: message.into(),
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(CrbmError::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
