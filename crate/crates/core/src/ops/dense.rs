use alloc::vec;
use alloc::vec::Vec;

use crate::real::{gemm, MatRef, Real};

/// `y (n×k) = x (n×f) · w (f×k) + b`.
pub fn linear_forward<T: Real>(n: usize, f: usize, k: usize, x: &[T], w: &[T], b: Option<&[T]>) -> Vec<T> {
    let mut y = vec![T::zero(); n * k];
    gemm(MatRef::new(x, n, f), MatRef::new(w, f, k), &mut y, false);
    if let Some(b) = b {
        for row in y.chunks_exact_mut(k) {
            row.iter_mut().zip(b).for_each(|(v, bb)| *v += *bb);
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
pub fn linear_backward<T: Real>(
    n: usize,
    f: usize,
    k: usize,
    x: &[T],
    w: &[T],
    dy: &[T],
    dx: Option<&mut [T]>,
    dw: Option<&mut [T]>,
    db: Option<&mut [T]>,
) {
    let dym = MatRef::new(dy, n, k);
    if let Some(dx) = dx {
        gemm(dym, MatRef::new(w, f, k).t(), dx, true);
    }
    if let Some(dw) = dw {
        gemm(MatRef::new(x, n, f).t(), dym, dw, true);
    }
    if let Some(db) = db {
        for row in dy.chunks_exact(k) {
            db.iter_mut().zip(row).for_each(|(d, g)| *d += *g);
        }
    }
}
