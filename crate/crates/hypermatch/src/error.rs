use thiserror::Error;

pub type HResult<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    /// A cross-check between two solvers or estimators failed.
    #[error("numerical guard failed: {0}")]
    Guard(String),
    #[error(transparent)]
    Module(#[from] hypermatch_core::Error),
    #[error("insufficient tail data: {found} pooled tail points, need {needed}")]
    InsufficientTailData { found: usize, needed: usize },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed record: {0}")]
    Record(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Record(_) => 2,
            HarnessError::Guard(_) => 3,
            HarnessError::Module(_) | HarnessError::InsufficientTailData { .. } | HarnessError::Io { .. } => 4,
        }
    }

    pub(crate) fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        HarnessError::Io { path: path.display().to_string(), message: e.to_string() }
    }
}
