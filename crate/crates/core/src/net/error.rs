use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("duplicate layer name `{0}`")]
    DuplicateName(String),
    #[error("unknown layer `{0}`")]
    UnknownLayer(String),
    #[error("layer `{layer}`: {detail}")]
    Shape { layer: String, detail: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parameter `{0}` is missing")]
    MissingParam(String),
    #[error("parameter `{name}` has shape {got:?}, layer needs {expected:?}")]
    ParamShape { name: String, expected: Vec<usize>, got: Vec<usize> },
    #[error("batch shape {got:?} does not match model input {expected:?}")]
    InputShape { expected: Vec<usize>, got: Vec<usize> },
    #[error("selector matched no parameters")]
    SelectorMatchedNothing,
    #[error("model has no classification head")]
    NotAClassifier,
    #[error(transparent)]
    Tensor(#[from] TensorError),
}
