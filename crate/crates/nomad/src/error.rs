use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] nomad_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),
    #[error("unsupported audio format in {}: {reason}", path.display())]
    UnsupportedFormat { path: PathBuf, reason: String },
    #[error("corrupt WAV header in {}: {reason}", path.display())]
    CorruptHeader { path: PathBuf, reason: String },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("{}: {reason}", path.display())]
    Table { path: PathBuf, reason: String },
    #[error("no usable WAV files in {}", .0.display())]
    EmptyCorpus(PathBuf),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Usage(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Self {
        if source.kind() == io::ErrorKind::NotFound {
            Error::NotFound(path.to_path_buf())
        } else {
            Error::Io { path: path.to_path_buf(), source }
        }
    }

    pub fn table(path: &Path, reason: impl ToString) -> Self {
        Error::Table { path: path.to_path_buf(), reason: reason.to_string() }
    }

    /// 1 for bad input or usage, 2 for failures of the tool itself.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Core(nomad_core::Error::EncoderFailed(_)) => 2,
            _ => 1,
        }
    }
}
