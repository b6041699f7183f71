use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("line {line}: reference to undefined node {id}")]
    Dangling { line: usize, id: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite weight at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("network description: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, col: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, col, msg: msg.into() }
    }

    /// True for errors caused by malformed or inconsistent user input, as
    /// opposed to broken internal invariants.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Invariant(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
