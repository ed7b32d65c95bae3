use std::path::PathBuf;

use chicgrasp_nn::NnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid episode log: {0}")]
    InvalidLog(String),

    #[error("format version mismatch: file has {found}, expected {expected}")]
    FormatVersion { found: u32, expected: u32 },

    #[error("format error: {0}")]
    Format(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("protocol error: malformed frame {bytes:?}")]
    Protocol { bytes: Vec<u8> },

    #[error("sampling failed: {0}")]
    SamplingFailed(String),

    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Nn(NnError),
}

impl From<NnError> for Error {
    fn from(e: NnError) -> Self {
        match e {
            NnError::TrainingDiverged { param } => {
                Error::TrainingDiverged(format!("non-finite gradient for parameter `{param}`"))
            }
            other => Error::Nn(other),
        }
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
