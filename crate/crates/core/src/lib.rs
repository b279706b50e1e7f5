//! Numerical core for residual and inception-style image classifiers.
//!
//! The crate is `no_std` (with `alloc`). It contains dense tensors with a
//! reverse-mode autodiff tape, declarative network builders with parameter
//! stores and a binary checkpoint codec, deterministic image transforms and
//! dataset splitting, optimizers with learning-rate policies, and evaluation
//! metrics including ROC/AUC and exact t-SNE. File IO, image decoding and the
//! command-line front end live in the `diacnn` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod autograd;
pub mod data;
pub mod eval;
pub mod net;
pub mod ops;
pub mod real;
pub mod rng;
pub mod tensor;
pub mod train;

pub use autograd::{Graph, Var};
pub use real::Real;
pub use tensor::{Tensor, TensorError};
