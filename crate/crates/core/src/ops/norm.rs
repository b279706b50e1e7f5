use alloc::vec;
use alloc::vec::Vec;

use crate::real::Real;

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.9;

/// Per-channel running mean and (population) variance.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

impl<T: Real> RunningStats<T> {
    pub fn new(channels: usize) -> Self {
        Self { mean: vec![T::zero(); channels], var: vec![T::one(); channels] }
    }

    /// `running = momentum * running + (1 - momentum) * batch`.
    pub fn update(&mut self, batch_mean: &[T], batch_var: &[T], momentum: T) {
        let keep = T::one() - momentum;
        for (r, &b) in self.mean.iter_mut().zip(batch_mean) {
            *r = momentum * *r + keep * b;
        }
        for (r, &b) in self.var.iter_mut().zip(batch_var) {
            *r = momentum * *r + keep * b;
        }
    }
}

/// Layout helper: `x` is viewed as `[n, c, inner]`.
#[derive(Clone, Copy, Debug)]
pub struct BnLayout {
    pub n: usize,
    pub c: usize,
    pub inner: usize,
}

impl BnLayout {
    fn count(&self) -> usize {
        self.n * self.inner
    }
}

/// Batch statistics: per-channel mean and population variance.
pub fn batch_moments<T: Real>(l: BnLayout, x: &[T]) -> (Vec<T>, Vec<T>) {
    let m = T::from_usize(l.count());
    let mut mean = vec![T::zero(); l.c];
    let mut var = vec![T::zero(); l.c];
    for c in 0..l.c {
        let mut s = T::zero();
        for n in 0..l.n {
            let base = (n * l.c + c) * l.inner;
            s += x[base..base + l.inner].iter().copied().sum::<T>();
        }
        let mu = s / m;
        let mut q = T::zero();
        for n in 0..l.n {
            let base = (n * l.c + c) * l.inner;
            q += x[base..base + l.inner].iter().map(|&v| (v - mu) * (v - mu)).sum::<T>();
        }
        mean[c] = mu;
        var[c] = q / m;
    }
    (mean, var)
}

/// Normalizes with the given statistics. Returns `(y, xhat, inv_std)`.
pub fn normalize<T: Real>(
    l: BnLayout,
    x: &[T],
    mean: &[T],
    var: &[T],
    gamma: &[T],
    beta: &[T],
    eps: T,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut y = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    for n in 0..l.n {
        for c in 0..l.c {
            let base = (n * l.c + c) * l.inner;
            for i in base..base + l.inner {
                let h = (x[i] - mean[c]) * inv_std[c];
                xhat[i] = h;
                y[i] = gamma[c] * h + beta[c];
            }
        }
    }
    (y, xhat, inv_std)
}

/// Gradient pieces of batch norm. `batch_stats` selects the train-mode input
/// gradient (statistics depend on `x`) versus the fixed-statistics one.
#[allow(clippy::too_many_arguments)]
pub fn batch_norm_backward<T: Real>(
    l: BnLayout,
    dy: &[T],
    xhat: &[T],
    inv_std: &[T],
    gamma: &[T],
    batch_stats: bool,
    dx: Option<&mut [T]>,
    dgamma: Option<&mut [T]>,
    dbeta: Option<&mut [T]>,
) {
    let mut sum_dy = vec![T::zero(); l.c];
    let mut sum_dy_xhat = vec![T::zero(); l.c];
    for n in 0..l.n {
        for c in 0..l.c {
            let base = (n * l.c + c) * l.inner;
            for i in base..base + l.inner {
                sum_dy[c] += dy[i];
                sum_dy_xhat[c] += dy[i] * xhat[i];
            }
        }
    }
    if let Some(dg) = dgamma {
        dg.iter_mut().zip(&sum_dy_xhat).for_each(|(d, s)| *d += *s);
    }
    if let Some(db) = dbeta {
        db.iter_mut().zip(&sum_dy).for_each(|(d, s)| *d += *s);
    }
    if let Some(dx) = dx {
        let m = T::from_usize(l.count());
        for n in 0..l.n {
            for c in 0..l.c {
                let base = (n * l.c + c) * l.inner;
                let k = gamma[c] * inv_std[c];
                for i in base..base + l.inner {
                    dx[i] += if batch_stats {
                        k * (dy[i] - sum_dy[c] / m - xhat[i] * sum_dy_xhat[c] / m)
                    } else {
                        k * dy[i]
                    };
                }
            }
        }
    }
}
