use alloc::vec::Vec;

use crate::real::Real;

pub fn relu_forward<T: Real>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect()
}

/// Passes gradient where `x > 0`; the subgradient at 0 is 0.
pub fn relu_backward<T: Real>(x: &[T], dy: &[T], dx: &mut [T]) {
    for ((d, &v), &g) in dx.iter_mut().zip(x).zip(dy) {
        if v > T::zero() {
            *d += g;
        }
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows<T: Real>(x: &[T], k: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(x.len());
    for row in x.chunks_exact(k) {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let start = out.len();
        out.extend(row.iter().map(|&v| (v - m).exp()));
        let s: T = out[start..].iter().copied().sum();
        out[start..].iter_mut().for_each(|v| *v /= s);
    }
    out
}

pub fn softmax_backward<T: Real>(p: &[T], dy: &[T], k: usize, dx: &mut [T]) {
    for ((pr, gr), dr) in p.chunks_exact(k).zip(dy.chunks_exact(k)).zip(dx.chunks_exact_mut(k)) {
        let dot: T = pr.iter().zip(gr).map(|(a, b)| *a * *b).sum();
        for ((d, &pv), &gv) in dr.iter_mut().zip(pr).zip(gr) {
            *d += pv * (gv - dot);
        }
    }
}

/// Mean over rows of `logsumexp(z) - z[label]`.
pub fn log_softmax_nll<T: Real>(z: &[T], k: usize, labels: &[usize]) -> T {
    let mut total = T::zero();
    for (row, &y) in z.chunks_exact(k).zip(labels) {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<T>().ln();
        total += lse - row[y];
    }
    total / T::from_usize(labels.len())
}
