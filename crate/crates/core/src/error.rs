use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A model or configuration parameter is outside its domain. `name` is the
    /// parameter as exposed on the command line (`p`, `lambda`, `m`, ...).
    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: String,
        reason: &'static str,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("malformed table: {0}")]
    Table(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, value: impl ToString, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value: value.to_string(),
            reason,
        }
    }

    /// Parameter name for [`Error::InvalidParameter`], `None` otherwise.
    pub fn parameter(&self) -> Option<&'static str> {
        match self {
            Error::InvalidParameter { name, .. } => Some(name),
            _ => None,
        }
    }
}
