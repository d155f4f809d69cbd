use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Runtime(nlr_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

impl HarnessError {
    pub fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Runtime(_) => 3,
            HarnessError::Io { .. } => 4,
        }
    }
}

impl From<nlr_core::Error> for HarnessError {
    fn from(e: nlr_core::Error) -> Self {
        match e {
            nlr_core::Error::Io { path, source } => HarnessError::Io { path, source },
            nlr_core::Error::Argument(msg) | nlr_core::Error::Statistics(msg) => HarnessError::Config(msg),
            other => HarnessError::Runtime(other),
        }
    }
}
