use thiserror::Error;

/// Errors raised by the recovery pipeline and its building blocks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CprError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The squared magnitude of the first lifted entry fell below the
    /// detection threshold, so its phase cannot anchor the other entries.
    #[error("first entry vanishes: |y[1]|^2 = {estimate:e} is below threshold {threshold:e}")]
    FirstEntryVanishes { estimate: f64, threshold: f64 },

    #[error("malformed measurement record: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, CprError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(CprError::InvalidArgument(msg.into()))
}
