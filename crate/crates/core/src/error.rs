use std::path::PathBuf;

/// Errors raised by the simulation, training and data layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("size error: {0}")]
    Size(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("shape error: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("encoding error: {0}")]
    Encoding(String),
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("statistics error: {0}")]
    Statistics(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::numeric(format!("{what}[{i}] is not finite"))),
        None => Ok(()),
    }
}
