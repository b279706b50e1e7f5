use alloc::string::String;

use thiserror::Error;

use crate::data::DataError;
use crate::net::NetError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
    #[error("no gradient for trainable parameter `{0}`")]
    MissingGradient(String),
    #[error("optimizer state does not match parameter `{0}`")]
    StateMismatch(String),
    #[error("unknown monitor metric `{0}`")]
    UnknownMonitor(String),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Data(#[from] DataError),
}
