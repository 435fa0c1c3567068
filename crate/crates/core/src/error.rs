use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside its documented domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// A mechanism cannot be calibrated for the requested privacy level.
    #[error("calibration error: {0}")]
    Calibration(String),
    /// A random generator exhausted its retry budget.
    #[error("generation failed: {0}")]
    Generation(String),
    /// An experiment spec is malformed.
    #[error("invalid spec field `{field}`: {message}")]
    Spec { field: String, message: String },
    /// Malformed text input such as an edge list.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
