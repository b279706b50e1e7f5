//! Interleaved `H×W×C` images with `f32` samples, nominally on the 8-bit scale.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::rng::XorShift64Star;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<f32>,
}

/// Reflect-101 index into `0..n` (the edge sample is not repeated).
fn reflect_index(mut i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let period = 2 * (n - 1);
    i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

/// Continuous reflect into `[0, n-1]`.
fn reflect_coord(x: f64, n: usize) -> f64 {
    if n == 1 {
        return 0.0;
    }
    let last = (n - 1) as f64;
    let period = 2.0 * last;
    let mut x = libm::fmod(x, period);
    if x < 0.0 {
        x += period;
    }
    if x > last {
        x = period - x;
    }
    x
}

impl Image {
    pub fn new(h: usize, w: usize, c: usize, data: Vec<f32>) -> Result<Self, DataError> {
        if h == 0 || w == 0 || c == 0 || data.len() != h * w * c {
            return Err(DataError::Image(format!("{} values for a {h}x{w}x{c} image", data.len())));
        }
        Ok(Self { h, w, c, data })
    }

    pub fn filled(h: usize, w: usize, c: usize, v: f32) -> Self {
        Self { h, w, c, data: vec![v; h * w * c] }
    }

    pub fn from_u8(h: usize, w: usize, c: usize, bytes: &[u8]) -> Result<Self, DataError> {
        Self::new(h, w, c, bytes.iter().map(|&b| b as f32).collect())
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, ch: usize) -> f32 {
        self.data[(y * self.w + x) * self.c + ch]
    }

    #[inline]
    fn set(&mut self, y: usize, x: usize, ch: usize, v: f32) {
        self.data[(y * self.w + x) * self.c + ch] = v;
    }

    /// Bilinear sample at continuous pixel coordinates, reflecting outside the frame.
    fn sample(&self, y: f64, x: f64, ch: usize) -> f32 {
        let y = reflect_coord(y, self.h);
        let x = reflect_coord(x, self.w);
        let (y0, x0) = (libm::floor(y) as usize, libm::floor(x) as usize);
        let (y1, x1) = ((y0 + 1).min(self.h - 1), (x0 + 1).min(self.w - 1));
        let (fy, fx) = ((y - y0 as f64) as f32, (x - x0 as f64) as f32);
        let top = self.at(y0, x0, ch) * (1.0 - fx) + self.at(y0, x1, ch) * fx;
        let bottom = self.at(y1, x0, ch) * (1.0 - fx) + self.at(y1, x1, ch) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Bilinear resize with pixel centres at `(i + 0.5) / n`; source
    /// coordinates are clamped to the frame.
    pub fn resize(&self, h: usize, w: usize) -> Result<Image, DataError> {
        if h == 0 || w == 0 {
            return Err(DataError::Image(format!("cannot resize to {h}x{w}")));
        }
        if (h, w) == (self.h, self.w) {
            return Ok(self.clone());
        }
        let src = |i: usize, from: usize, to: usize| -> (usize, usize, f32) {
            let s = ((i as f64 + 0.5) * from as f64 / to as f64 - 0.5).clamp(0.0, (from - 1) as f64);
            let i0 = libm::floor(s) as usize;
            (i0, (i0 + 1).min(from - 1), (s - i0 as f64) as f32)
        };
        let cols: Vec<_> = (0..w).map(|x| src(x, self.w, w)).collect();
        let mut out = Image::filled(h, w, self.c, 0.0);
        for y in 0..h {
            let (y0, y1, fy) = src(y, self.h, h);
            for (x, &(x0, x1, fx)) in cols.iter().enumerate() {
                for ch in 0..self.c {
                    let top = self.at(y0, x0, ch) * (1.0 - fx) + self.at(y0, x1, ch) * fx;
                    let bottom = self.at(y1, x0, ch) * (1.0 - fx) + self.at(y1, x1, ch) * fx;
                    out.set(y, x, ch, top * (1.0 - fy) + bottom * fy);
                }
            }
        }
        Ok(out)
    }

    /// Rounds and clamps every sample onto the 8-bit grid.
    pub fn quantize(&self) -> Image {
        let data = self.data.iter().map(|v| libm::roundf(*v).clamp(0.0, 255.0)).collect();
        Image { data, ..*self }
    }

    /// Per-channel histogram equalization on the quantized image:
    /// `v -> round((cdf(v) - cdf_min) / (N - cdf_min) * 255)`.
    /// A constant channel is returned unchanged.
    pub fn histogram_equalize(&self) -> Image {
        let q = self.quantize();
        let mut out = q.clone();
        let n = self.h * self.w;
        for ch in 0..self.c {
            let mut hist = [0usize; 256];
            for px in q.data.iter().skip(ch).step_by(self.c) {
                hist[*px as usize] += 1;
            }
            let mut cdf = [0usize; 256];
            let mut acc = 0;
            for (v, count) in hist.iter().enumerate() {
                acc += count;
                cdf[v] = acc;
            }
            let cdf_min = hist.iter().zip(&cdf).find(|(h, _)| **h > 0).map(|(_, c)| *c).unwrap_or(0);
            if cdf_min == n {
                continue;
            }
            let denom = (n - cdf_min) as f64;
            let map: Vec<f32> =
                cdf.iter().map(|&c| libm::round(c.saturating_sub(cdf_min) as f64 / denom * 255.0) as f32).collect();
            for px in out.data.iter_mut().skip(ch).step_by(self.c) {
                *px = map[*px as usize];
            }
        }
        out
    }

    /// Normalized 1-D Gaussian taps for radius `ceil(3 sigma)`.
    pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
        let radius = libm::ceil(3.0 * sigma) as isize;
        let taps: Vec<f64> =
            (-radius..=radius).map(|i| libm::exp(-((i * i) as f64) / (2.0 * sigma * sigma))).collect();
        let total: f64 = taps.iter().sum();
        taps.into_iter().map(|t| t / total).collect()
    }

    /// Separable Gaussian blur with reflect-101 borders; `sigma == 0` is the identity.
    pub fn gaussian_blur(&self, sigma: f64) -> Result<Image, DataError> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(DataError::Config(format!("blur sigma must be nonnegative, got {sigma}")));
        }
        if sigma == 0.0 {
            return Ok(self.clone());
        }
        let k = Self::gaussian_kernel(sigma);
        let r = (k.len() / 2) as isize;
        let mut tmp = vec![0f64; self.data.len()];
        for y in 0..self.h {
            for x in 0..self.w {
                for ch in 0..self.c {
                    let mut acc = 0.0;
                    for (t, wt) in k.iter().enumerate() {
                        let xx = reflect_index(x as isize + t as isize - r, self.w);
                        acc += wt * self.at(y, xx, ch) as f64;
                    }
                    tmp[(y * self.w + x) * self.c + ch] = acc;
                }
            }
        }
        let mut out = self.clone();
        for y in 0..self.h {
            for x in 0..self.w {
                for ch in 0..self.c {
                    let mut acc = 0.0;
                    for (t, wt) in k.iter().enumerate() {
                        let yy = reflect_index(y as isize + t as isize - r, self.h);
                        acc += wt * tmp[(yy * self.w + x) * self.c + ch];
                    }
                    out.set(y, x, ch, acc as f32);
                }
            }
        }
        Ok(out)
    }

    pub fn normalize01(&self) -> Image {
        Image { data: self.data.iter().map(|v| v / 255.0).collect(), ..*self }
    }

    pub fn hflip(&self) -> Image {
        let mut out = self.clone();
        for y in 0..self.h {
            for x in 0..self.w {
                for ch in 0..self.c {
                    out.set(y, x, ch, self.at(y, self.w - 1 - x, ch));
                }
            }
        }
        out
    }

    /// Rotates by `degrees` (counter-clockwise) and scales by `zoom` about
    /// the centre in one bilinear resampling pass with reflected borders.
    /// `zoom > 1` enlarges the content.
    pub fn rotate_zoom(&self, degrees: f64, zoom: f64) -> Image {
        if degrees == 0.0 && zoom == 1.0 {
            return self.clone();
        }
        let (s, c) = libm::sincos(degrees.to_radians());
        let (cy, cx) = ((self.h as f64 - 1.0) / 2.0, (self.w as f64 - 1.0) / 2.0);
        let mut out = self.clone();
        for y in 0..self.h {
            for x in 0..self.w {
                let (dy, dx) = ((y as f64 - cy) / zoom, (x as f64 - cx) / zoom);
                // inverse rotation maps output pixels back to the source
                let sx = c * dx - s * dy + cx;
                let sy = s * dx + c * dy + cy;
                for ch in 0..self.c {
                    out.set(y, x, ch, self.sample(sy, sx, ch));
                }
            }
        }
        out
    }

    /// Rotation, then zoom, then horizontal flip. Always draws exactly
    /// three numbers from `rng`, so the stream stays aligned across configs.
    pub fn augment(&self, rng: &mut XorShift64Star, cfg: &AugmentConfig) -> Image {
        let angle = rng.uniform(-cfg.rotate_deg_max, cfg.rotate_deg_max);
        let zoom = rng.uniform(cfg.zoom_range.0, cfg.zoom_range.1);
        let flip = rng.next_f64() < cfg.hflip_prob;
        let out = self.rotate_zoom(angle, zoom);
        if flip {
            out.hflip()
        } else {
            out
        }
    }

    /// Channel-planar copy as a `1×C×H×W` tensor.
    pub fn to_chw(&self) -> Vec<f32> {
        let mut out = vec![0f32; self.data.len()];
        let plane = self.h * self.w;
        for (i, px) in self.data.chunks_exact(self.c).enumerate() {
            for (ch, v) in px.iter().enumerate() {
                out[ch * plane + i] = *v;
            }
        }
        out
    }

    pub fn to_tensor(&self) -> Tensor<f32> {
        Tensor::from_vec(&[1, self.c, self.h, self.w], self.to_chw()).expect("image dims are nonzero")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    pub rotate_deg_max: f64,
    pub zoom_range: (f64, f64),
    pub hflip_prob: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { rotate_deg_max: 15.0, zoom_range: (0.9, 1.1), hflip_prob: 0.5 }
    }
}

impl AugmentConfig {
    pub fn disabled() -> Self {
        Self { rotate_deg_max: 0.0, zoom_range: (1.0, 1.0), hflip_prob: 0.0 }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let (lo, hi) = self.zoom_range;
        if !(0.0..=180.0).contains(&self.rotate_deg_max) {
            return Err(DataError::Config(format!("rotate_deg_max {} outside [0, 180]", self.rotate_deg_max)));
        }
        if !(lo > 0.0 && lo <= hi && hi < 2.0) {
            return Err(DataError::Config(format!("zoom_range ({lo}, {hi}) must lie within (0, 2)")));
        }
        if !(0.0..=1.0).contains(&self.hflip_prob) {
            return Err(DataError::Config(format!("hflip_prob {} outside [0, 1]", self.hflip_prob)));
        }
        Ok(())
    }
}

/// Preprocessing applied to every image.
///
/// Order: resize to `resize_hw`, resize to `input_hw` when set and
/// different, equalize, blur, augment (training batches only), scale to
/// `[0, 1]`, transpose to channel-planar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub resize_hw: (usize, usize),
    pub input_hw: Option<(usize, usize)>,
    pub equalize: bool,
    pub blur_sigma: f64,
    pub normalize01: bool,
    pub augment: AugmentConfig,
    pub seed: u64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            resize_hw: (224, 224),
            input_hw: None,
            equalize: true,
            blur_sigma: 0.0,
            normalize01: true,
            augment: AugmentConfig::default(),
            seed: 0,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.resize_hw.0 == 0 || self.resize_hw.1 == 0 || self.input_hw.is_some_and(|(h, w)| h == 0 || w == 0) {
            return Err(DataError::Config("resize dimensions must be positive".into()));
        }
        if !(self.blur_sigma >= 0.0 && self.blur_sigma.is_finite()) {
            return Err(DataError::Config(format!("blur_sigma must be nonnegative, got {}", self.blur_sigma)));
        }
        self.augment.validate()
    }

    /// Final spatial size of preprocessed images.
    pub fn output_hw(&self) -> (usize, usize) {
        self.input_hw.unwrap_or(self.resize_hw)
    }

    /// The deterministic stages: resize(s), equalization and blur.
    pub fn prepare(&self, img: &Image) -> Result<Image, DataError> {
        let mut out = img.resize(self.resize_hw.0, self.resize_hw.1)?;
        if let Some((h, w)) = self.input_hw {
            out = out.resize(h, w)?;
        }
        if self.equalize {
            out = out.histogram_equalize();
        }
        out.gaussian_blur(self.blur_sigma)
    }
}
