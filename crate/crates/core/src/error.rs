use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("sentence {sentence}: {message}")]
    Validation { sentence: usize, message: String },

    #[error("alignment mismatch at sentence {sentence}: {message}")]
    Alignment { sentence: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("learner failure: {0}")]
    Learner(String),

    #[error("model artifact at {path:?} is missing or corrupt: {message}")]
    Model { path: PathBuf, message: String },

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn validation(sentence: usize, message: impl Into<String>) -> Self {
        Error::Validation {
            sentence,
            message: message.into(),
        }
    }

    pub(crate) fn alignment(sentence: usize, message: impl Into<String>) -> Self {
        Error::Alignment {
            sentence,
            message: message.into(),
        }
    }
}
