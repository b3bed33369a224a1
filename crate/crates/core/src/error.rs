use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coordinate {value} does not fit the wire field (|v| must be < 100)")]
    EncodingOverflow { value: f64 },

    #[error("parse error at byte {offset}: {reason}")]
    Parse { offset: usize, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("line {line}: {key}: {reason}")]
    ScenarioFile {
        line: usize,
        key: String,
        reason: String,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(offset: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
