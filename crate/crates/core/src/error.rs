use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("image error on {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("insufficient samples for split: {0}")]
    InsufficientSamples(String),

    #[error("malformed manifest at line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("corrupt bottleneck cache {path}: {message}; delete the file and re-run `extract` to rebuild it")]
    CorruptCache { path: PathBuf, message: String },

    #[error("malformed bottleneck file: {0}")]
    BottleneckFormat(String),

    #[error("malformed layer file: {0}")]
    LayerFormat(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid metrics input: {0}")]
    Metrics(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
