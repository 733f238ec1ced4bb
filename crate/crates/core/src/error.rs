use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch, left is {left:?}, right is {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("{0}: empty input")]
    Empty(&'static str),

    #[error("{what}: index {index} out of range 0..{len}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("singular geometry: {0} are coincident")]
    SingularGeometry(&'static str),

    #[error("degenerate effective channel for user {0}")]
    DegenerateChannel(usize),

    #[error("config error: {key}: {msg}")]
    Config { key: String, msg: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("stale forward cache: {0}")]
    StaleCache(&'static str),

    #[error("replay buffer holds {have} experiences, need {need}")]
    NotReady { have: usize, need: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("unsupported {what} format version {found} (expected major {expected})")]
    Version {
        what: &'static str,
        found: String,
        expected: u16,
    },

    #[error("malformed {what}: {msg}")]
    Format { what: &'static str, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Parse { .. } | Error::Version { .. } => 2,
            Error::Io { .. } => 4,
            _ => 3,
        }
    }
}
