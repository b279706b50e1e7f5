use alloc::string::String;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {0} predictions/scores for {1} labels")]
    LengthMismatch(usize, usize),
    #[error("no samples")]
    Empty,
    #[error("both classes must be present")]
    SingleClass,
    #[error("class {0} does not occur in the labels")]
    ClassAbsent(usize),
    #[error("label {label} outside {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("point {point}: perplexity {target} is unreachable (attainable range {min:.4}..={max:.4})")]
    PerplexityUnreachable { point: usize, target: f64, min: f64, max: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
