use std::path::PathBuf;

use diacnn_core::data::DataError;
use diacnn_core::eval::EvalError;
use diacnn_core::net::{CheckpointError, NetError};
use diacnn_core::train::TrainError;
use thiserror::Error;

/// Exit status for usage and input errors.
pub const EXIT_INPUT: i32 = 2;
/// Exit status for numeric failures such as a diverging loss.
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {detail}", path.display())]
    Manifest { path: PathBuf, detail: String },
    #[error("{}: cannot decode image: {detail}", path.display())]
    Decode { path: PathBuf, detail: String },
    #[error("{}: {source}", path.display())]
    Checkpoint { path: PathBuf, source: CheckpointError },
    #[error("config: {0}")]
    Config(String),
    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) | Error::Train(TrainError::Diverged { .. }) => EXIT_NUMERIC,
            _ => EXIT_INPUT,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
