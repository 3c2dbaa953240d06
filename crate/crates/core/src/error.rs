use thiserror::Error;

/// Crate-wide error type.
///
/// The variants map onto the CLI exit-code contract: argument and parse
/// problems exit with 2, numeric/data/construction failures with 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("training failed at step {step}: {msg}")]
    Training { step: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_) | Error::Parse { .. } => 2,
            _ => 3,
        }
    }
}
