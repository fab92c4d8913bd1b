use std::path::PathBuf;

/// Errors raised by file formats, ingestion and the evaluation harness.
#[derive(Debug, thiserror::Error)]
pub enum StimError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] stim_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, StimError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> StimError {
    let path = path.into();
    move |source| StimError::Io { path, source }
}

pub(crate) fn parse_err(path: &std::path::Path, line: usize, message: impl Into<String>) -> StimError {
    StimError::Parse { path: path.to_path_buf(), line, message: message.into() }
}
