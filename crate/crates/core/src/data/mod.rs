//! Datasets, deterministic splitting, image preprocessing and batching.

mod batch;
mod dataset;
mod error;
pub mod image;
pub mod synth;

pub use batch::{batch_iter, epoch_order, Batch, BatchIter, BatchOptions, ImageSet};
pub use dataset::{binary_task_filter, split_dataset, split_sizes, Dataset, Eye, Sample, Split, ODIR_CLASSES};
pub use error::DataError;
pub use image::{AugmentConfig, Image, PreprocessConfig};
