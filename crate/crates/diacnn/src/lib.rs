//! File formats, image IO and the command-line workflow around
//! [`diacnn_core`]: manifests, TOML run configs, checkpoint files, CSV and
//! SVG artifacts.

pub mod commands;
pub mod config;
pub mod error;
pub mod export;
pub mod imageio;
pub mod manifest;
pub mod rundir;
pub mod svg;

pub use diacnn_core as core;
pub use error::{Error, Result, EXIT_INPUT, EXIT_NUMERIC};
