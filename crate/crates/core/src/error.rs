use std::path::PathBuf;

use crate::adapters::AdapterError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value violates its invariant. `field` names the offender.
    #[error("{message}")]
    Config { field: String, message: String },

    #[error("metadata: {0}")]
    Metadata(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("media engine failed during {op}: {message}")]
    Engine { op: &'static str, message: String },

    /// A media operation was asked to do something its preconditions forbid.
    #[error("{0}")]
    InvalidInput(String),

    #[error(transparent)]
    Adapter(#[from] AdapterError),

    #[error("phase {phase} failed: {source}")]
    Phase {
        phase: u8,
        #[source]
        source: Box<Error>,
    },

    #[error("checkpoint digest mismatch in phase {phase}: {detail}")]
    DigestMismatch { phase: u8, detail: String },

    #[error("evaluation: {0}")]
    Eval(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Innermost error, looking through phase wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Phase { source, .. } => source.root(),
            other => other,
        }
    }
}
