use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input outside the mathematical domain of the routine (negative density, non-finite point, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller contract violated (shape mismatch, bad order, parameter out of range).
    #[error("usage error: {0}")]
    Usage(String),

    /// A field failed the positivity requirement; `minimum` is the smallest value seen.
    #[error("non-admissible field: minimum {minimum:.6e} {context}")]
    NotAdmissible { minimum: f64, context: String },

    /// An iterative routine did not reach its tolerance.
    #[error("numeric failure: {message} (residual {residual:.3e})")]
    Numeric { message: String, residual: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
