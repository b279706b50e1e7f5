//! Exact t-SNE on dense pairwise affinities.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::rng::XorShift64Star;

/// Entropy tolerance (nats) of the per-point bandwidth search.
pub const ENTROPY_TOL: f64 = 1e-5;
/// Bisection steps allowed per point.
pub const MAX_BISECTION: usize = 50;
const P_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iters: usize,
    pub lr: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub momentum: (f64, f64),
    /// Per-coordinate step gains (+0.2 on sign change, ×0.8 otherwise).
    pub adaptive_gains: bool,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iters: 1000,
            lr: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            momentum: (0.5, 0.8),
            adaptive_gains: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding2D {
    pub coords: Vec<[f64; 2]>,
    /// KL(P || Q) of the final embedding, without exaggeration.
    pub kl: f64,
    pub iters: usize,
    /// KL after every iteration from the end of exaggeration onward.
    pub kl_trace: Vec<f64>,
}

fn sq_dists(x: &[f64], n: usize, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = x[i * d..i * d + d].iter().zip(&x[j * d..j * d + d]).map(|(a, b)| (a - b) * (a - b)).sum();
            out[i * n + j] = s;
            out[j * n + i] = s;
        }
    }
    out
}

/// Fills `row` with `exp(-beta (d - dmin))`, normalized, and returns its entropy.
fn row_entropy(dist: &[f64], dmin: f64, beta: f64, row: &mut [f64]) -> f64 {
    let mut sum = 0.0;
    for (p, &dj) in row.iter_mut().zip(dist) {
        *p = libm::exp(-beta * (dj - dmin));
        sum += *p;
    }
    let mut h = 0.0;
    for p in row.iter_mut() {
        *p /= sum;
        if *p > 0.0 {
            h -= *p * libm::log(*p);
        }
    }
    h
}

/// Row-conditional affinities `p(j|i)`, each row matching `ln(perplexity)`.
///
/// The attainable entropy of row `i` runs from `ln m` (all mass on the `m`
/// nearest points) to `ln(n-1)` (uniform); targets outside are an error.
pub fn conditional_p(x: &[f64], n: usize, d: usize, perplexity: f64) -> Result<Vec<f64>, EvalError> {
    let target = libm::log(perplexity);
    let dist = sq_dists(x, n, d);
    let mut p = vec![0.0; n * n];
    let mut others = vec![0.0; n - 1];
    let mut row = vec![0.0; n - 1];
    for i in 0..n {
        for (k, j) in (0..n).filter(|&j| j != i).enumerate() {
            others[k] = dist[i * n + j];
        }
        let dmin = others.iter().copied().fold(f64::INFINITY, f64::min);
        let dmax = others.iter().copied().fold(0.0, f64::max);
        let m = others.iter().filter(|&&v| v == dmin).count();
        let (hmin, hmax) = (libm::log(m as f64), libm::log((n - 1) as f64));
        if target > hmax + ENTROPY_TOL || target < hmin - ENTROPY_TOL || (m == n - 1 && (target - hmax).abs() > ENTROPY_TOL) {
            return Err(EvalError::PerplexityUnreachable { point: i, target: perplexity, min: m as f64, max: (n - 1) as f64 });
        }
        if (target - hmax).abs() <= ENTROPY_TOL {
            row.iter_mut().for_each(|v| *v = 1.0 / (n - 1) as f64);
        } else {
            let gap = others.iter().copied().filter(|&v| v > dmin).fold(f64::INFINITY, f64::min) - dmin;
            let (mut lo, mut hi) = (libm::log(1e-8 / (dmax - dmin)), libm::log(1e3 / gap));
            for _ in 0..MAX_BISECTION {
                let mid = 0.5 * (lo + hi);
                let h = row_entropy(&others, dmin, libm::exp(mid), &mut row);
                if (h - target).abs() <= ENTROPY_TOL {
                    break;
                }
                // Entropy falls as beta grows.
                if h > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        for (k, j) in (0..n).filter(|&j| j != i).enumerate() {
            p[i * n + j] = row[k];
        }
    }
    Ok(p)
}

/// Symmetrized joint affinities `(p(j|i) + p(i|j)) / 2n`, floored at 1e-12 off the diagonal.
pub fn joint_p(x: &[f64], n: usize, d: usize, perplexity: f64) -> Result<Vec<f64>, EvalError> {
    let c = conditional_p(x, n, d, perplexity)?;
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((c[i * n + j] + c[j * n + i]) / (2 * n) as f64).max(P_FLOOR);
            }
        }
    }
    Ok(p)
}

/// Student-t kernel `1 / (1 + |yi - yj|^2)` and its off-diagonal sum.
fn kernel(y: &[[f64; 2]], num: &mut [f64]) -> f64 {
    let n = y.len();
    let mut sum = 0.0;
    for i in 0..n {
        num[i * n + i] = 0.0;
        for j in i + 1..n {
            let (dx, dy) = (y[i][0] - y[j][0], y[i][1] - y[j][1]);
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = v;
            num[j * n + i] = v;
            sum += 2.0 * v;
        }
    }
    sum
}

fn kl(p: &[f64], num: &[f64], sum: f64, n: usize) -> f64 {
    let mut kl = 0.0;
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let pij = p[i * n + j];
            let q = (num[i * n + j] / sum).max(P_FLOOR);
            kl += pij * libm::log(pij / q);
        }
    }
    kl
}

/// Embeds the rows of the row-major `n×d` matrix `features` in two dimensions.
pub fn tsne(features: &[f64], n: usize, d: usize, cfg: &TsneConfig) -> Result<Embedding2D, EvalError> {
    if n < 4 {
        return Err(EvalError::InvalidArgument("t-SNE needs at least 4 points".into()));
    }
    if d == 0 || features.len() != n * d {
        return Err(EvalError::InvalidArgument("features must be n×d with d ≥ 1".into()));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::InvalidArgument("non-finite feature".into()));
    }
    if !(cfg.perplexity >= 1.0) || !(cfg.lr > 0.0) || !(cfg.early_exaggeration >= 1.0) {
        return Err(EvalError::InvalidArgument("perplexity ≥ 1, lr > 0 and exaggeration ≥ 1 required".into()));
    }
    let p = joint_p(features, n, d, cfg.perplexity)?;

    let mut rng = XorShift64Star::new(cfg.seed);
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [1e-2 * rng.normal(), 1e-2 * rng.normal()]).collect();
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut num = vec![0.0; n * n];
    let mut kl_trace = Vec::new();

    for it in 0..cfg.iters {
        let exaggerating = it < cfg.exaggeration_iters;
        let exag = if exaggerating { cfg.early_exaggeration } else { 1.0 };
        let momentum = if exaggerating { cfg.momentum.0 } else { cfg.momentum.1 };
        if it == cfg.exaggeration_iters {
            // The phases are separate descents: velocity built against the
            // exaggerated target would overshoot the plain one.
            update.iter_mut().for_each(|u| *u = [0.0; 2]);
        }
        let sum = kernel(&y, &mut num);
        for i in 0..n {
            let mut g = [0.0; 2];
            for j in (0..n).filter(|&j| j != i) {
                let w = (exag * p[i * n + j] - num[i * n + j] / sum) * num[i * n + j];
                g[0] += 4.0 * w * (y[i][0] - y[j][0]);
                g[1] += 4.0 * w * (y[i][1] - y[j][1]);
            }
            for c in 0..2 {
                if cfg.adaptive_gains {
                    gains[i][c] = if (g[c] > 0.0) != (update[i][c] > 0.0) { gains[i][c] + 0.2 } else { gains[i][c] * 0.8 };
                    gains[i][c] = gains[i][c].max(0.01);
                }
                update[i][c] = momentum * update[i][c] - cfg.lr * gains[i][c] * g[c];
            }
        }
        let mut mean = [0.0; 2];
        for (yi, u) in y.iter_mut().zip(&update) {
            yi[0] += u[0];
            yi[1] += u[1];
            mean[0] += yi[0] / n as f64;
            mean[1] += yi[1] / n as f64;
        }
        for yi in y.iter_mut() {
            yi[0] -= mean[0];
            yi[1] -= mean[1];
        }
        if it + 1 >= cfg.exaggeration_iters {
            let sum = kernel(&y, &mut num);
            kl_trace.push(kl(&p, &num, sum, n));
        }
    }
    let sum = kernel(&y, &mut num);
    let final_kl = kl(&p, &num, sum, n);
    if !final_kl.is_finite() || y.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
        return Err(EvalError::InvalidArgument("t-SNE diverged".into()));
    }
    Ok(Embedding2D { coords: y, kl: final_kl, iters: cfg.iters, kl_trace })
}
