use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid argument: {0}")]
    Arg(String),

    #[error(transparent)]
    Core(#[from] chicgrasp_core::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("websocket error: {0}")]
    Ws(#[from] Box<tungstenite::Error>),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<tungstenite::Error> for CliError {
    fn from(e: tungstenite::Error) -> Self {
        CliError::Ws(Box::new(e))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
