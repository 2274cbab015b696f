use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid parameters: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("accuracy error: {0}")]
    Accuracy(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
