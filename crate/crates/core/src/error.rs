use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand extents are incompatible.
    #[error("dimension error: {0}")]
    Dimension(String),
    /// A value lies outside the domain of the requested function.
    #[error("domain error: {0}")]
    Domain(String),
    /// A precondition of an operation was violated by the caller.
    #[error("contract error: {0}")]
    Contract(String),
    /// A file could not be parsed or failed its integrity check.
    #[error("format error: {0}")]
    Format(String),
    /// A loss or gradient stopped being finite during training.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// Invalid user-supplied settings.
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}
