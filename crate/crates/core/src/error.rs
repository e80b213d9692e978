use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BmlError {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
}

impl BmlError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        BmlError::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = BmlError> = std::result::Result<T, E>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> BmlError {
    BmlError::param(name, reason)
}
