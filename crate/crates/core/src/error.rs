use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input in a line-oriented text format.
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    /// Malformed TREC SGML corpus.
    #[error("corpus parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("zero-norm vector for word {0:?}")]
    ZeroVector(String),

    #[error("duplicate document id {0:?}")]
    DuplicateDocument(String),

    #[error("failed to load {}: {message}", file.display())]
    Load { file: PathBuf, message: String },

    #[error("feedback error: {0}")]
    Feedback(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn load(file: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Load {
            file: file.into(),
            message: message.into(),
        }
    }
}
