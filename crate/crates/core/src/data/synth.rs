//! Seeded synthetic images for smoke runs and tests.
//!
//! Class `k` of `K` is a sinusoidal grating at orientation `k·180°/K` with
//! random frequency, phase, contrast and colour tint, plus pixel noise. The
//! orientation is the only class signal.

use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::image::Image;
use crate::rng::{derive_seed, XorShift64Star};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub per_class: usize,
    pub height: usize,
    pub width: usize,
    /// Standard deviation of additive pixel noise on the 8-bit scale.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { num_classes: 2, per_class: 50, height: 32, width: 32, noise: 20.0, seed: 0 }
    }
}

/// One grating image; deterministic in `(seed, index)`.
pub fn grating(class: usize, num_classes: usize, height: usize, width: usize, noise: f64, seed: u64, index: u64) -> Image {
    let mut rng = XorShift64Star::new(derive_seed(seed, index));
    let theta = PI * class as f64 / num_classes as f64 + rng.uniform(-0.1, 0.1);
    let cycles = rng.uniform(2.5, 4.5);
    let phase = rng.uniform(0.0, 2.0 * PI);
    let contrast = rng.uniform(50.0, 90.0);
    let tint = [rng.uniform(0.8, 1.2), rng.uniform(0.8, 1.2), rng.uniform(0.8, 1.2)];
    let (s, c) = libm::sincos(theta);
    let scale = 2.0 * PI * cycles / height.max(width) as f64;
    let mut data = Vec::with_capacity(height * width * 3);
    for y in 0..height {
        for x in 0..width {
            let t = (x as f64 * c + y as f64 * s) * scale + phase;
            let base = 128.0 + contrast * libm::sin(t);
            for k in tint {
                let v = base * k + noise * rng.normal();
                data.push(libm::round(v.clamp(0.0, 255.0)) as f32);
            }
        }
    }
    Image { h: height, w: width, c: 3, data }
}

/// `per_class` images of every class, interleaved by class.
pub fn generate(cfg: &SynthConfig) -> (Vec<Image>, Vec<usize>) {
    let mut images = Vec::with_capacity(cfg.per_class * cfg.num_classes);
    let mut labels = Vec::with_capacity(images.capacity());
    for i in 0..cfg.per_class {
        for k in 0..cfg.num_classes {
            let index = (i * cfg.num_classes + k) as u64;
            images.push(grating(k, cfg.num_classes, cfg.height, cfg.width, cfg.noise, cfg.seed, index));
            labels.push(k);
        }
    }
    (images, labels)
}
