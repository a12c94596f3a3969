use std::io;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument or model violated a documented precondition.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A matrix expected to be a covariance had a clearly negative eigenvalue.
    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below -{tolerance:e}")]
    Indefinite { eigenvalue: f64, tolerance: f64 },

    /// The input series does not contain enough samples for the request.
    #[error("series too short: need {needed} samples, have {available}")]
    TooShort { needed: usize, available: usize },

    /// Exact nullspace computation did not produce a one-dimensional kernel.
    #[error("kernel of the {rows}x{cols} moment matrix has dimension {dimension}, expected 1")]
    KernelDimension {
        rows: usize,
        cols: usize,
        dimension: usize,
    },

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("malformed data: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// True for errors caused by the caller's arguments rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        if err.is_io_error() {
            match err.into_kind() {
                csv::ErrorKind::Io(e) => Error::Io(e),
                _ => unreachable!(),
            }
        } else {
            Error::Format(err.to_string())
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        if err.is_io() {
            Error::Io(err.into())
        } else {
            Error::Format(err.to_string())
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
