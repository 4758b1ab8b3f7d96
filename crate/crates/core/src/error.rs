use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid configuration or rule/arm parameters. `path` names the offending field.
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The convex conjugate is unbounded at the requested point.
    #[error("conjugate is infinite at z = {z}")]
    InfiniteConjugate { z: f64 },

    /// Requested value lies above the supremum of a monotone branch.
    #[error("value {value} is outside the range of the branch (supremum {supremum})")]
    Range { value: f64, supremum: f64 },

    /// The operation is not available for this family.
    #[error("not implemented: {0}")]
    NotImplemented(String),

    /// Sample mean requested for an arm with no observations.
    #[error("arm {arm} has no observations at time {t}")]
    UndefinedMean { arm: usize, t: u64 },

    /// A rule produced an output that violates the protocol contract.
    #[error("protocol violation: {0}")]
    Protocol(String),

    /// Not enough usable episodes to form an estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
