use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A request would allocate an unreasonable amount of work or memory.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// Too few counts to form the requested estimate.
    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),

    /// Internal numerical consistency check failed.
    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("fit failed: {reason} ({diagnostics})")]
    Fit { reason: String, diagnostics: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}
