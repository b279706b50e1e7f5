//! Forward and backward kernels on flat row-major buffers.
//!
//! The autodiff tape in [`crate::autograd`] owns shapes and bookkeeping; the
//! functions here only do arithmetic. Every loop runs in a fixed order so
//! results are bitwise reproducible.

pub mod activation;
pub mod conv;
pub mod dense;
pub mod norm;
pub mod pool;

pub use conv::{ConvGeom, Padding};
pub use norm::RunningStats;
pub use pool::PoolGeom;
