use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller violated an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),

    /// A mathematical quantity is undefined for the given input.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid {what}: {field}: {reason}")]
    Invalid {
        what: &'static str,
        field: String,
        reason: String,
    },

    #[error("failed to parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit status for this kind of failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Usage(_) => 2,
            Error::Io { .. } => 3,
            Error::Parse { .. } | Error::Csv { .. } => 4,
            Error::Invalid { .. } | Error::Dimension(_) => 5,
            Error::Domain(_) => 6,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
