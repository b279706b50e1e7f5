//! Declarative network descriptions, parameters and the forward pass.

pub mod checkpoint;
mod error;
pub mod forward;
pub mod fragments;
pub mod params;
pub mod presets;
pub mod spec;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use error::NetError;
pub use forward::{classification_loss, forward, ForwardOutput, Grads, Mode, Model, Prediction, StepOutput};
pub use fragments::{ConvAttrs, InceptionWidths};
pub use params::{FreezePreset, Param, ParamStore, Selector};
pub use presets::{build_baseline_cnn, build_diacnn, build_mini_inception};
pub use spec::{AuxHead, Layer, LayerKind, ModelSpec, SpecBuilder};
