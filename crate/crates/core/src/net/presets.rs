//! Complete classifiers.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::fragments::{ConvAttrs, InceptionWidths};
use super::spec::{AuxHead, FreezeGroups, ModelSpec, SpecBuilder};
use super::NetError;
use crate::ops::Padding;

/// Input side length the residual classifier is built for.
pub const DIACNN_INPUT: usize = 32;

/// Weight of the auxiliary loss in the inception preset.
pub const AUX_LOSS_WEIGHT: f64 = 0.3;

fn check_classes(num_classes: usize) -> Result<(), NetError> {
    if num_classes < 2 {
        return Err(NetError::InvalidArgument(format!("num_classes must be at least 2, got {num_classes}")));
    }
    Ok(())
}

/// ResNet-20 style classifier on 32×32×3 input.
///
/// Stem conv, three stages of three basic blocks at widths `w`, `2w`, `4w`,
/// global average pooling and a dense head named `fc`. The first block of
/// stages 2 and 3 downsamples with stride 2 and a 1×1 conv + BN shortcut.
pub fn build_diacnn(net_width: usize, num_classes: usize) -> Result<ModelSpec, NetError> {
    if net_width == 0 {
        return Err(NetError::InvalidArgument("net_width must be positive".to_string()));
    }
    check_classes(num_classes)?;
    let mut b = SpecBuilder::new(&format!("diacnn{net_width}"), [3, DIACNN_INPUT, DIACNN_INPUT]);
    let mut x = b.conv_bn_relu("stem", &b.input(), net_width, 3, 1)?;
    let mut last_block = String::new();
    for stage in 0..3 {
        let width = net_width << stage;
        for block in 0..3 {
            let p = format!("s{}b{}", stage + 1, block + 1);
            let stride = if stage > 0 && block == 0 { 2 } else { 1 };
            let h = b.conv_bn_relu(&format!("{p}.a"), &x, width, 3, stride)?;
            let c = b.conv(&format!("{p}.b.conv"), &h, width, 3, 1)?;
            let f = b.batch_norm(&format!("{p}.b.bn"), &c)?;
            let skip = if stride != 1 || b.channels_of(&x)? != width {
                let s = b.conv(&format!("{p}.proj.conv"), &x, width, 1, stride)?;
                b.batch_norm(&format!("{p}.proj.bn"), &s)?
            } else {
                x.clone()
            };
            let sum = b.add(&format!("{p}.add"), &skip, &f)?;
            x = b.relu(&format!("{p}.relu"), &sum)?;
            last_block = p;
        }
    }
    let gap = b.global_avg_pool("gap", &x)?;
    let fc = b.dense("fc", &gap, num_classes)?;
    b.set_groups(FreezeGroups { head: vec!["fc".to_string()], last_block: vec![format!("{last_block}."), "fc".to_string()] });
    b.finish_classifier(&fc, &gap, num_classes, Vec::new())
}

/// Five conv-BN-ReLU-maxpool stages (8 to 128 filters) and four dense layers.
pub fn build_baseline_cnn(num_classes: usize, input_hw: (usize, usize)) -> Result<ModelSpec, NetError> {
    check_classes(num_classes)?;
    if input_hw.0 < 32 || input_hw.1 < 32 {
        return Err(NetError::InvalidArgument(format!(
            "input {}x{} is too small for five 2x2 poolings (minimum 32x32)",
            input_hw.0, input_hw.1
        )));
    }
    let mut b = SpecBuilder::new("baseline_cnn", [3, input_hw.0, input_hw.1]);
    let mut x = b.input();
    for (i, filters) in [8, 16, 32, 64, 128].into_iter().enumerate() {
        let p = format!("conv{}", i + 1);
        let r = b.conv_bn_relu(&p, &x, filters, 3, 1)?;
        x = b.max_pool(&format!("{p}.pool"), &r, 2, 2, Padding::Valid)?;
    }
    let flat = b.flatten("flatten", &x)?;
    let mut h = flat;
    for (i, units) in [256, 128, 64].into_iter().enumerate() {
        let d = b.dense(&format!("fc{}", i + 1), &h, units)?;
        h = b.relu(&format!("fc{}.relu", i + 1), &d)?;
    }
    let penultimate = h.clone();
    let out = b.dense("fc4", &h, num_classes)?;
    b.set_groups(FreezeGroups {
        head: vec!["fc4".to_string()],
        last_block: vec!["fc2".to_string(), "fc3".to_string(), "fc4".to_string()],
    });
    b.finish_classifier(&out, &penultimate, num_classes, Vec::new())
}

/// Desk-scale inception network on 32×32×3 input.
///
/// Two-branch stem (3×3 and 5×5 convs, pooled to 16×16) followed by batch
/// norm and ReLU, two residual-inception blocks, an auxiliary classifier
/// tapped after them, a reduction to `2·width` channels, global average
/// pooling and the main dense head.
pub fn build_mini_inception(num_classes: usize, width: usize) -> Result<ModelSpec, NetError> {
    check_classes(num_classes)?;
    if width < 2 {
        return Err(NetError::InvalidArgument(format!("width must be at least 2, got {width}")));
    }
    let mut b = SpecBuilder::new("mini_inception", [3, 32, 32]);
    let x = b.input();
    let s = b.stem("stem", &x, ConvAttrs { out_channels: width, kernel: 3 }, ConvAttrs { out_channels: width, kernel: 5 })?;
    let s = b.batch_norm("stem.bn", &s)?;
    let mut h = b.relu("stem.relu", &s)?;
    let half = width / 2;
    let w = InceptionWidths::new(half, half, half, width);
    for i in 1..=2 {
        h = b.residual_inception_block(&format!("block{i}"), &h, width, w)?;
    }
    let aux = b.aux_classifier("aux", &h, width, num_classes)?;
    let r = b.reduction("reduce", &h, width, (half, half, half), 2 * width)?;
    let gap = b.global_avg_pool("gap", &r)?;
    let fc = b.dense("fc", &gap, num_classes)?;
    b.set_groups(FreezeGroups {
        head: vec!["fc".to_string(), "aux.fc".to_string()],
        last_block: vec!["reduce.".to_string(), "fc".to_string(), "aux.".to_string()],
    });
    b.finish_classifier(&fc, &gap, num_classes, vec![AuxHead { layer: aux, weight: AUX_LOSS_WEIGHT }])
}
