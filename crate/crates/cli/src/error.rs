use std::io;
use std::path::PathBuf;

/// Errors surfaced by the CLI, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] anomix::Error),
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },
    #[error("invalid model file {}: {message}", path.display())]
    ModelFile { path: PathBuf, message: String },
}

impl CliError {
    pub const USAGE: i32 = 2;
    pub const DATA: i32 = 3;
    pub const NUMERIC: i32 = 4;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => Self::USAGE,
            CliError::Core(anomix::Error::Numeric(_)) => Self::NUMERIC,
            CliError::Core(anomix::Error::InvalidArgument(_)) => Self::USAGE,
            _ => Self::DATA,
        }
    }
}
