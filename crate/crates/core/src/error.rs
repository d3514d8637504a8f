use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors surfaced by the toolkit. The CLI maps these onto exit codes via
/// [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Manifest {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("duplicate glyph key {0}")]
    DuplicateGlyph(String),

    #[error("invalid bitmap: {0}")]
    Bitmap(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{kind}: {msg}")]
    Generation { kind: String, msg: String },

    #[error("template error for {kind}: {msg}")]
    Template { kind: String, msg: String },

    #[error("unknown instance ids: {}", .0.join(", "))]
    UnknownInstances(Vec<String>),

    #[error("glyph {0} is not in the index")]
    NotIndexed(String),

    #[error("training data leak: instance {0} belongs to the test split")]
    Leakage(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("remote error: {0}")]
    Remote(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn generation(kind: impl ToString, msg: impl Into<String>) -> Self {
        Error::Generation {
            kind: kind.to_string(),
            msg: msg.into(),
        }
    }

    /// 2 for data problems, 3 for remote failures. Usage errors (1) are
    /// raised by argument parsing before any of these exist.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Remote(_) => 3,
            Error::Config(_) => 1,
            _ => 2,
        }
    }
}
