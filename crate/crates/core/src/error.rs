use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: unknown split tag {tag:?}")]
    UnknownSplit {
        path: String,
        line: usize,
        tag: String,
    },

    #[error("{0}: no records")]
    NoRecords(String),

    #[error("{path}:{line}: released label {released} disagrees with aggregated label {aggregated}")]
    LabelMismatch {
        path: String,
        line: usize,
        released: bool,
        aggregated: bool,
    },

    #[error("index format: {0}")]
    IndexFormat(String),

    #[error("undefined AUC: labels contain a single class")]
    UndefinedAuc,

    #[error("unmatched pair: {0}")]
    UnmatchedPair(String),

    #[error("scorer protocol error for chain {chain_id:?}: {message}")]
    Protocol { chain_id: String, message: String },

    #[error("scorer timed out after {0} ms")]
    Timeout(u64),

    #[error("scorer transport: {0}")]
    Transport(String),
}

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn malformed(path: &Path, line: usize, message: impl Into<String>) -> Self {
        Error::MalformedRecord {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }

    /// True when the error stems from bad caller input rather than a fault
    /// inside the toolkit or a scorer.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::Protocol { .. } | Error::Timeout(_) | Error::Transport(_)
        )
    }
}
