use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use super::dataset::{Dataset, Sample, Split};
use super::image::{AugmentConfig, Image, PreprocessConfig};
use super::DataError;
use crate::rng::{derive_seed, XorShift64Star};
use crate::tensor::Tensor;

/// Images that have been through the deterministic preprocessing stages,
/// with their labels. All images share one size and channel count.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageSet {
    pub images: Vec<Image>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl ImageSet {
    pub fn new(images: Vec<Image>, labels: Vec<usize>, num_classes: usize) -> Result<Self, DataError> {
        if images.len() != labels.len() {
            return Err(DataError::Image(format!("{} images but {} labels", images.len(), labels.len())));
        }
        if let Some(first) = images.first() {
            if let Some(bad) = images.iter().find(|i| (i.h, i.w, i.c) != (first.h, first.w, first.c)) {
                return Err(DataError::Image(format!(
                    "mixed image sizes {}x{}x{} and {}x{}x{}",
                    first.h, first.w, first.c, bad.h, bad.w, bad.c
                )));
            }
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(DataError::Config(format!("label {l} out of range for {num_classes} classes")));
        }
        Ok(Self { images, labels, num_classes })
    }

    /// Loads and prepares every sample of `split` in dataset order.
    pub fn from_dataset<E, F>(ds: &Dataset, split: Split, cfg: &PreprocessConfig, mut load: F) -> Result<Self, E>
    where
        F: FnMut(&Sample) -> Result<Image, E>,
        E: From<DataError>,
    {
        cfg.validate()?;
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for s in ds.split(split) {
            images.push(cfg.prepare(&load(s)?)?);
            labels.push(s.label);
        }
        Ok(Self::new(images, labels, ds.num_classes())?)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = alloc::vec![0; self.num_classes];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchOptions {
    pub batch_size: usize,
    /// Shuffle with a permutation seeded by `derive_seed(seed, epoch)`.
    pub shuffle_seed: Option<u64>,
    pub epoch: u64,
    /// Per-sample augmentation, seeded by `(seed, epoch, sample index)`.
    pub augment: Option<(AugmentConfig, u64)>,
    pub normalize01: bool,
}

impl BatchOptions {
    /// In-order, unaugmented batches scaled to `[0, 1]`.
    pub fn eval(batch_size: usize) -> Self {
        Self { batch_size, shuffle_seed: None, epoch: 0, augment: None, normalize01: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    /// `N×C×H×W`.
    pub images: Tensor<f32>,
    pub labels: Vec<usize>,
    /// Positions of the batch members in the source set.
    pub indices: Vec<usize>,
}

pub struct BatchIter<'a> {
    set: &'a ImageSet,
    order: Vec<usize>,
    pos: usize,
    opts: BatchOptions,
}

/// Epoch order for `n` items: identity, or a seeded Fisher-Yates permutation.
pub fn epoch_order(n: usize, shuffle_seed: Option<u64>, epoch: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(seed) = shuffle_seed {
        XorShift64Star::new(derive_seed(seed, epoch)).shuffle(&mut order);
    }
    order
}

/// Iterates `set` in batches; the last batch may be short.
pub fn batch_iter<'a>(set: &'a ImageSet, opts: &BatchOptions) -> Result<BatchIter<'a>, DataError> {
    if opts.batch_size == 0 {
        return Err(DataError::Config("batch_size must be at least 1".to_string()));
    }
    if set.is_empty() {
        return Err(DataError::EmptySplit("requested".to_string()));
    }
    if let Some((aug, _)) = &opts.augment {
        aug.validate()?;
    }
    Ok(BatchIter { set, order: epoch_order(set.len(), opts.shuffle_seed, opts.epoch), pos: 0, opts: opts.clone() })
}

impl BatchIter<'_> {
    fn finish(&self, index: usize) -> Image {
        let img = &self.set.images[index];
        let img = match &self.opts.augment {
            Some((cfg, seed)) => {
                let mut rng = XorShift64Star::new(derive_seed(derive_seed(*seed, self.opts.epoch), index as u64));
                img.augment(&mut rng, cfg)
            }
            None => img.clone(),
        };
        if self.opts.normalize01 {
            img.normalize01()
        } else {
            img
        }
    }
}

impl Iterator for BatchIter<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.opts.batch_size).min(self.order.len());
        let indices = self.order[self.pos..end].to_vec();
        self.pos = end;
        let first = &self.set.images[indices[0]];
        let mut data = Vec::with_capacity(indices.len() * first.data.len());
        for &i in &indices {
            data.extend(self.finish(i).to_chw());
        }
        let images = Tensor::from_vec(&[indices.len(), first.c, first.h, first.w], data).expect("batch dims are nonzero");
        let labels = indices.iter().map(|&i| self.set.labels[i]).collect();
        Some(Batch { images, labels, indices })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.order.len() - self.pos).div_ceil(self.opts.batch_size);
        (left, Some(left))
    }
}

impl ExactSizeIterator for BatchIter<'_> {}
