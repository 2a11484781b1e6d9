use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An exponential enumeration was requested beyond its supported size.
    #[error("capacity exceeded for {what}: {got} > {limit}")]
    Capacity {
        what: &'static str,
        limit: usize,
        got: usize,
    },
    /// The input is well-formed but outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// A caller violated an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    /// A model document or data file could not be parsed.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn check_capacity(what: &'static str, limit: usize, got: usize) -> Result<()> {
        if got > limit {
            Err(Error::Capacity { what, limit, got })
        } else {
            Ok(())
        }
    }
}

/// Fails with a contract error when two lengths differ.
pub(crate) fn check_dims(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::contract(format!(
            "{what}: expected {expected} features, got {got}"
        )));
    }
    Ok(())
}
