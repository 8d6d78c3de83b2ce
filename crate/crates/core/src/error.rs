use thiserror::Error;

/// Errors returned by the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("fit did not converge: {0}")]
    NotConverged(String),
    #[error("no resonance found: {0}")]
    NoResonance(String),
    #[error("model regime violated: {0}")]
    Regime(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
