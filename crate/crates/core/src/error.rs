use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A user-supplied parameter failed validation. `field` is the parameter
    /// name as it appears on the command line and in config files.
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("{what} = {value} is outside the domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("inconsistent model: {0}")]
    Inconsistent(String),

    #[error("runoff overflowed a 64-bit integer")]
    Overflow,
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
