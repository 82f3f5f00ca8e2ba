use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("could not place UE {ue} after {attempts} attempts; the AP exclusion zone covers the area")]
    InfeasibleGeometry { ue: usize, attempts: u32 },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("config parse error at line {line}, column {column}: {message}")]
    ConfigParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid value for `{key}`: {reason}")]
    ConfigValidation { key: String, reason: String },

    #[error("event queue ran dry at {at_secs:.6} s with {pending} sessions still pending")]
    Starvation { at_secs: f64, pending: usize },

    #[error("empty sample set")]
    EmptySamples,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Other(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
