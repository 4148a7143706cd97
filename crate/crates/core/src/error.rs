use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing required file {0}")]
    MissingFile(PathBuf),

    #[error("{file}:{line}: {msg}")]
    Format {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("invalid graph: {0}")]
    Invalid(String),

    #[error("generation failed: {0}")]
    Generation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn format(file: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }
}
