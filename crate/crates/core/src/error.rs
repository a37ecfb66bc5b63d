use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Arguments outside the documented domain of an operation.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Data that cannot be used (NaN, negative variance proxies, ragged panels).
    #[error("data error: {0}")]
    Data(String),
    /// A likelihood or recursion produced a non-positive or non-finite value.
    #[error("evaluation error: {0}")]
    Evaluation(String),
    /// Dynamics matrix with spectral radius at or above one.
    #[error("non-stationary parameters: spectral radius {spectral_radius:.6} (Gershgorin bound {bound:.6})")]
    NonStationary { spectral_radius: f64, bound: f64 },
    /// Malformed input file.
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: u64, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<csv::Error> for Error {
    /// Keeps the underlying I/O error, and with it the error kind, when there is one.
    fn from(e: csv::Error) -> Self {
        if !e.is_io_error() {
            return Error::Io(std::io::Error::other(e));
        }
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!("is_io_error checked above"),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
