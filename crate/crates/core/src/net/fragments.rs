//! Inception-family building blocks.
//!
//! Each block has two forms: a builder extension that appends it to a larger
//! graph, and a standalone constructor returning a headless [`ModelSpec`]
//! for testing the block in isolation.

use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::spec::{AuxHead, ModelSpec, SpecBuilder};
use super::NetError;
use crate::ops::Padding;

/// A same-padded square convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvAttrs {
    pub out_channels: usize,
    pub kernel: usize,
}

/// Widths of the 1×1, 3×3 and 5×5 branches and of the closing 1×1 conv.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InceptionWidths {
    pub b1: usize,
    pub b3: usize,
    pub b5: usize,
    pub out: usize,
}

impl InceptionWidths {
    pub fn new(b1: usize, b3: usize, b5: usize, out: usize) -> Self {
        Self { b1, b3, b5, out }
    }
}

fn check_positive(what: &str, values: &[usize]) -> Result<(), NetError> {
    if values.contains(&0) {
        return Err(NetError::InvalidArgument(format!("{what} must be positive, got {values:?}")));
    }
    Ok(())
}

fn check_channels(b: &SpecBuilder, input: &str, in_channels: usize, what: &str) -> Result<(), NetError> {
    let actual = b.channels_of(input)?;
    if actual != in_channels {
        return Err(NetError::Shape {
            layer: String::from(input),
            detail: format!("{what} declared for {in_channels} channels, producer has {actual}"),
        });
    }
    Ok(())
}

/// Runs the 1×1, 3×3 and 5×5 conv-BN-ReLU branches plus a stride-1 max-pool
/// passthrough and concatenates them along channels.
fn parallel_branches(b: &mut SpecBuilder, prefix: &str, input: &str, w: InceptionWidths) -> Result<String, NetError> {
    let pool = b.max_pool(&format!("{prefix}.pool"), input, 3, 1, Padding::Same)?;
    let c1 = b.conv_bn_relu(&format!("{prefix}.b1"), input, w.b1, 1, 1)?;
    let c3 = b.conv_bn_relu(&format!("{prefix}.b3"), input, w.b3, 3, 1)?;
    let c5 = b.conv_bn_relu(&format!("{prefix}.b5"), input, w.b5, 5, 1)?;
    b.concat(&format!("{prefix}.concat"), &[&c1, &c3, &c5, &pool])
}

impl SpecBuilder {
    /// Parallel branches, channel concat, then a 1×1 conv and batch norm.
    pub fn inception_module(&mut self, prefix: &str, input: &str, in_channels: usize, w: InceptionWidths) -> Result<String, NetError> {
        check_positive("branch widths", &[w.b1, w.b3, w.b5, w.out])?;
        check_channels(self, input, in_channels, "inception module")?;
        let cat = parallel_branches(self, prefix, input, w)?;
        let proj = self.conv(&format!("{prefix}.proj"), &cat, w.out, 1, 1)?;
        self.batch_norm(&format!("{prefix}.proj_bn"), &proj)
    }

    /// `relu(x + inception(x))`; the module must map back to `in_channels`.
    pub fn residual_inception_block(
        &mut self,
        prefix: &str,
        input: &str,
        in_channels: usize,
        w: InceptionWidths,
    ) -> Result<String, NetError> {
        if w.out != in_channels {
            return Err(NetError::Shape {
                layer: String::from(prefix),
                detail: format!("skip carries {in_channels} channels, branch produces {}", w.out),
            });
        }
        let branch = self.inception_module(&format!("{prefix}.module"), input, in_channels, w)?;
        let sum = self.add(&format!("{prefix}.add"), input, &branch)?;
        self.relu(&format!("{prefix}.relu"), &sum)
    }

    /// `maxpool(conv(x, w1)) + maxpool(conv(x, w2))` with 2×2 stride-2 pooling.
    pub fn stem(&mut self, prefix: &str, input: &str, w1: ConvAttrs, w2: ConvAttrs) -> Result<String, NetError> {
        check_positive("stem attributes", &[w1.out_channels, w1.kernel, w2.out_channels, w2.kernel])?;
        if w1.out_channels != w2.out_channels {
            return Err(NetError::Shape {
                layer: String::from(prefix),
                detail: format!("branches produce {} and {} channels", w1.out_channels, w2.out_channels),
            });
        }
        let c1 = self.conv(&format!("{prefix}.conv1"), input, w1.out_channels, w1.kernel, 1)?;
        let p1 = self.max_pool(&format!("{prefix}.pool1"), &c1, 2, 2, Padding::Valid)?;
        let c2 = self.conv(&format!("{prefix}.conv2"), input, w2.out_channels, w2.kernel, 1)?;
        let p2 = self.max_pool(&format!("{prefix}.pool2"), &c2, 2, 2, Padding::Valid)?;
        self.add(&format!("{prefix}.add"), &p1, &p2)
    }

    /// Branch concat followed by a 1×1 conv to `out_channels`, batch norm and ReLU.
    pub fn reduction(
        &mut self,
        prefix: &str,
        input: &str,
        in_channels: usize,
        widths: (usize, usize, usize),
        out_channels: usize,
    ) -> Result<String, NetError> {
        let w = InceptionWidths::new(widths.0, widths.1, widths.2, out_channels);
        check_positive("branch widths", &[w.b1, w.b3, w.b5, w.out])?;
        check_channels(self, input, in_channels, "reduction")?;
        let cat = parallel_branches(self, prefix, input, w)?;
        self.conv_bn_relu(&format!("{prefix}.proj"), &cat, out_channels, 1, 1)
    }

    /// `fc(avgpool(conv1x1(x)))`; returns the logits layer.
    pub fn aux_classifier(&mut self, prefix: &str, input: &str, in_channels: usize, num_classes: usize) -> Result<String, NetError> {
        check_positive("auxiliary classifier sizes", &[in_channels, num_classes])?;
        check_channels(self, input, in_channels, "auxiliary classifier")?;
        let c = self.conv(&format!("{prefix}.conv"), input, in_channels, 1, 1)?;
        let p = self.global_avg_pool(&format!("{prefix}.gap"), &c)?;
        self.dense(&format!("{prefix}.fc"), &p, num_classes)
    }
}

/// Standalone inception module on a `[in_channels, h, w]` input.
pub fn inception_module_spec(in_channels: usize, hw: (usize, usize), w: InceptionWidths) -> Result<ModelSpec, NetError> {
    let mut b = SpecBuilder::new("inception_module", [in_channels, hw.0, hw.1]);
    let x = b.input();
    let out = b.inception_module("m", &x, in_channels, w)?;
    b.finish_fragment(&out)
}

pub fn residual_inception_block_spec(in_channels: usize, hw: (usize, usize), w: InceptionWidths) -> Result<ModelSpec, NetError> {
    let mut b = SpecBuilder::new("residual_inception_block", [in_channels, hw.0, hw.1]);
    let x = b.input();
    let out = b.residual_inception_block("block", &x, in_channels, w)?;
    b.finish_fragment(&out)
}

pub fn stem_spec(input_shape: [usize; 3], w1: ConvAttrs, w2: ConvAttrs) -> Result<ModelSpec, NetError> {
    let mut b = SpecBuilder::new("stem", input_shape);
    let x = b.input();
    let out = b.stem("stem", &x, w1, w2)?;
    b.finish_fragment(&out)
}

pub fn reduction_spec(
    in_channels: usize,
    hw: (usize, usize),
    widths: (usize, usize, usize),
    out_channels: usize,
) -> Result<ModelSpec, NetError> {
    let mut b = SpecBuilder::new("reduction", [in_channels, hw.0, hw.1]);
    let x = b.input();
    let out = b.reduction("red", &x, in_channels, widths, out_channels)?;
    b.finish_fragment(&out)
}

/// The auxiliary head as a classifier in its own right.
pub fn aux_classifier_spec(in_channels: usize, hw: (usize, usize), num_classes: usize) -> Result<ModelSpec, NetError> {
    let mut b = SpecBuilder::new("aux_classifier", [in_channels, hw.0, hw.1]);
    let x = b.input();
    let out = b.aux_classifier("aux", &x, in_channels, num_classes)?;
    let pen = alloc::string::String::from("aux.gap");
    b.finish_classifier(&out, &pen, num_classes, alloc::vec::Vec::<AuxHead>::new())
}
