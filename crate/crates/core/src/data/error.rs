use alloc::string::String;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("row {row}: unknown class `{token}`")]
    UnknownClass { row: usize, token: String },
    #[error("row {row}: {detail}")]
    BadRow { row: usize, detail: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("split ratios must be nonnegative and sum to 1, got {0:?}")]
    BadRatios([f64; 3]),
    #[error("class `{class}` has {count} samples, fewer than the {splits} splits")]
    ClassTooSmall { class: String, count: usize, splits: usize },
    #[error("class sets overlap on `{0}`")]
    OverlappingClasses(String),
    #[error("empty class set")]
    EmptyClassSet,
    #[error("split `{0}` is empty")]
    EmptySplit(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("image: {0}")]
    Image(String),
}
