use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("schema mismatch in {path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] sgda_core::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    /// Short machine-readable tag used in CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Io { .. } => "io",
            HarnessError::Parse { .. } => "parse",
            HarnessError::Config(_) => "config",
            HarnessError::Schema { .. } => "schema",
            HarnessError::Core(_) => "numeric",
            HarnessError::Pool(_) => "pool",
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
