use alloc::format;
use alloc::vec::Vec;

use super::conv::{out_dim, Padding};
use crate::real::Real;
use crate::tensor::{arg_err, shape_err, TensorError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolGeom {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub window: usize,
    pub stride: usize,
    pub pad: usize,
    pub oh: usize,
    pub ow: usize,
}

impl PoolGeom {
    pub fn new(x: &[usize], window: usize, stride: usize, padding: Padding) -> Result<Self, TensorError> {
        const OP: &str = "pool2d";
        if x.len() != 4 {
            return Err(shape_err(OP, format!("expected NCHW input, got {x:?}")));
        }
        if window == 0 || stride == 0 {
            return Err(arg_err(OP, "window and stride must be positive"));
        }
        if padding == Padding::Same && window.is_multiple_of(2) {
            return Err(arg_err(OP, format!("same padding needs an odd window, got {window}")));
        }
        let pad = padding.amount(window);
        if window > x[2] + 2 * pad || window > x[3] + 2 * pad {
            return Err(arg_err(OP, format!("window {window} larger than input {}x{}", x[2], x[3])));
        }
        let oh = out_dim(x[2], window, pad, stride).ok_or(TensorError::EmptyOutput { op: OP })?;
        let ow = out_dim(x[3], window, pad, stride).ok_or(TensorError::EmptyOutput { op: OP })?;
        Ok(Self { n: x[0], c: x[1], h: x[2], w: x[3], window, stride, pad, oh, ow })
    }

    pub fn out_shape(&self) -> [usize; 4] {
        [self.n, self.c, self.oh, self.ow]
    }
}

/// Returns the pooled values and, per output, the flat input index of the
/// winning element. Ties go to the first maximum in row-major window order;
/// padded cells never win.
pub fn maxpool_forward<T: Real>(g: &PoolGeom, x: &[T]) -> (Vec<T>, Vec<usize>) {
    let total = g.n * g.c * g.oh * g.ow;
    let mut out = Vec::with_capacity(total);
    let mut arg = Vec::with_capacity(total);
    for plane in 0..g.n * g.c {
        let base = plane * g.h * g.w;
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let mut best = T::neg_infinity();
                let mut best_idx = usize::MAX;
                for ki in 0..g.window {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    for kj in 0..g.window {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        if ix < 0 || ix >= g.w as isize {
                            continue;
                        }
                        let idx = base + iy as usize * g.w + ix as usize;
                        // NaN never wins, so a NaN-only window leaves best_idx unset.
                        if x[idx] > best || best_idx == usize::MAX {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                out.push(best);
                arg.push(best_idx);
            }
        }
    }
    (out, arg)
}

pub fn maxpool_backward<T: Real>(argmax: &[usize], dy: &[T], dx: &mut [T]) {
    for (&i, &g) in argmax.iter().zip(dy) {
        dx[i] += g;
    }
}

/// Windowed average over valid (unpadded) windows.
pub fn avgpool_forward<T: Real>(g: &PoolGeom, x: &[T]) -> Vec<T> {
    let scale = T::one() / T::from_usize(g.window * g.window);
    let mut out = Vec::with_capacity(g.n * g.c * g.oh * g.ow);
    for plane in 0..g.n * g.c {
        let base = plane * g.h * g.w;
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let mut s = T::zero();
                for ki in 0..g.window {
                    let row = base + (oy * g.stride + ki) * g.w + ox * g.stride;
                    s += x[row..row + g.window].iter().copied().sum::<T>();
                }
                out.push(s * scale);
            }
        }
    }
    out
}

pub fn avgpool_backward<T: Real>(g: &PoolGeom, dy: &[T], dx: &mut [T]) {
    let scale = T::one() / T::from_usize(g.window * g.window);
    for plane in 0..g.n * g.c {
        let base = plane * g.h * g.w;
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let gv = dy[(plane * g.oh + oy) * g.ow + ox] * scale;
                for ki in 0..g.window {
                    let row = base + (oy * g.stride + ki) * g.w + ox * g.stride;
                    dx[row..row + g.window].iter_mut().for_each(|v| *v += gv);
                }
            }
        }
    }
}

/// Mean over the trailing `inner` elements of each of `planes` rows.
pub fn global_avg_forward<T: Real>(x: &[T], planes: usize, inner: usize) -> Vec<T> {
    let scale = T::one() / T::from_usize(inner);
    (0..planes).map(|p| x[p * inner..(p + 1) * inner].iter().copied().sum::<T>() * scale).collect()
}

pub fn global_avg_backward<T: Real>(dy: &[T], inner: usize, dx: &mut [T]) {
    let scale = T::one() / T::from_usize(inner);
    for (p, &g) in dy.iter().enumerate() {
        dx[p * inner..(p + 1) * inner].iter_mut().for_each(|v| *v += g * scale);
    }
}
