use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::real::{gemm, MatRef, Real};
use crate::tensor::{arg_err, shape_err, TensorError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// Zero padding of `(k - 1) / 2` on each side; keeps H×W at stride 1.
    Same,
    Valid,
}

impl Padding {
    pub(crate) fn amount(self, kernel: usize) -> usize {
        match self {
            Padding::Same => (kernel - 1) / 2,
            Padding::Valid => 0,
        }
    }
}

/// Resolved geometry of one cross-correlation call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub oc: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad_h: usize,
    pub pad_w: usize,
    pub oh: usize,
    pub ow: usize,
}

pub(crate) fn out_dim(size: usize, kernel: usize, pad: usize, stride: usize) -> Option<usize> {
    let padded = size + 2 * pad;
    (padded >= kernel).then(|| (padded - kernel) / stride + 1)
}

impl ConvGeom {
    pub fn new(x: &[usize], w: &[usize], stride: usize, padding: Padding) -> Result<Self, TensorError> {
        const OP: &str = "conv2d";
        if x.len() != 4 || w.len() != 4 {
            return Err(shape_err(OP, format!("expected NCHW input and OIHW kernel, got {x:?} and {w:?}")));
        }
        if x[1] != w[1] {
            return Err(shape_err(OP, format!("input has {} channels, kernel expects {}", x[1], w[1])));
        }
        if stride == 0 {
            return Err(arg_err(OP, "stride must be at least 1"));
        }
        let (kh, kw) = (w[2], w[3]);
        if padding == Padding::Same && (kh % 2 == 0 || kw % 2 == 0) {
            return Err(arg_err(OP, format!("same padding needs odd kernel sides, got {kh}x{kw}")));
        }
        let (pad_h, pad_w) = (padding.amount(kh), padding.amount(kw));
        let oh = out_dim(x[2], kh, pad_h, stride).ok_or(TensorError::EmptyOutput { op: OP })?;
        let ow = out_dim(x[3], kw, pad_w, stride).ok_or(TensorError::EmptyOutput { op: OP })?;
        Ok(Self { n: x[0], c: x[1], h: x[2], w: x[3], oc: w[0], kh, kw, stride, pad_h, pad_w, oh, ow })
    }

    pub fn out_shape(&self) -> [usize; 4] {
        [self.n, self.oc, self.oh, self.ow]
    }

    fn patch(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn spatial_out(&self) -> usize {
        self.oh * self.ow
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad_h == 0 && self.pad_w == 0
    }

    /// Output columns `[lo, hi)` whose input column `ox*stride + kj - pad` is in range.
    fn valid_cols(&self, kj: usize) -> (usize, usize) {
        valid_range(self.ow, self.w, self.stride, kj, self.pad_w)
    }

    fn valid_rows(&self, ki: usize) -> (usize, usize) {
        valid_range(self.oh, self.h, self.stride, ki, self.pad_h)
    }
}

fn valid_range(out: usize, size: usize, stride: usize, k: usize, pad: usize) -> (usize, usize) {
    // o*stride + k >= pad  and  o*stride + k < size + pad
    let lo = if k >= pad { 0 } else { (pad - k).div_ceil(stride) };
    let hi = if size + pad > k { ((size + pad - k - 1) / stride + 1).min(out) } else { 0 };
    (lo.min(hi), hi)
}

fn im2col<T: Real>(g: &ConvGeom, img: &[T], col: &mut [T]) {
    let ohw = g.spatial_out();
    for c in 0..g.c {
        let plane = &img[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            let (ylo, yhi) = g.valid_rows(ki);
            for kj in 0..g.kw {
                let row = ((c * g.kh + ki) * g.kw + kj) * ohw;
                let dst = &mut col[row..row + ohw];
                let (xlo, xhi) = g.valid_cols(kj);
                for oy in 0..g.oh {
                    let out = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    if oy < ylo || oy >= yhi || xlo >= xhi {
                        out.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let iy = oy * g.stride + ki - g.pad_h;
                    let src = &plane[iy * g.w..(iy + 1) * g.w];
                    out[..xlo].iter_mut().for_each(|v| *v = T::zero());
                    out[xhi..].iter_mut().for_each(|v| *v = T::zero());
                    let ix0 = xlo * g.stride + kj - g.pad_w;
                    if g.stride == 1 {
                        out[xlo..xhi].copy_from_slice(&src[ix0..ix0 + (xhi - xlo)]);
                    } else {
                        for (k, o) in out[xlo..xhi].iter_mut().enumerate() {
                            *o = src[ix0 + k * g.stride];
                        }
                    }
                }
            }
        }
    }
}

fn col2im_add<T: Real>(g: &ConvGeom, col: &[T], img: &mut [T]) {
    let ohw = g.spatial_out();
    for c in 0..g.c {
        let plane = &mut img[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            let (ylo, yhi) = g.valid_rows(ki);
            for kj in 0..g.kw {
                let row = ((c * g.kh + ki) * g.kw + kj) * ohw;
                let src = &col[row..row + ohw];
                let (xlo, xhi) = g.valid_cols(kj);
                if xlo >= xhi {
                    continue;
                }
                for oy in ylo..yhi {
                    let iy = oy * g.stride + ki - g.pad_h;
                    let ix0 = xlo * g.stride + kj - g.pad_w;
                    let dst = &mut plane[iy * g.w..(iy + 1) * g.w];
                    for (k, v) in src[oy * g.ow + xlo..oy * g.ow + xhi].iter().enumerate() {
                        dst[ix0 + k * g.stride] += *v;
                    }
                }
            }
        }
    }
}

pub fn conv2d_forward<T: Real>(g: &ConvGeom, x: &[T], w: &[T], b: Option<&[T]>) -> Vec<T> {
    let (patch, ohw) = (g.patch(), g.spatial_out());
    let img_len = g.c * g.h * g.w;
    let mut out = vec![T::zero(); g.n * g.oc * ohw];
    let mut col = if g.is_pointwise() { Vec::new() } else { vec![T::zero(); patch * ohw] };
    let wm = MatRef::new(w, g.oc, patch);
    for n in 0..g.n {
        let img = &x[n * img_len..(n + 1) * img_len];
        let dst = &mut out[n * g.oc * ohw..(n + 1) * g.oc * ohw];
        if g.is_pointwise() {
            gemm(wm, MatRef::new(img, patch, ohw), dst, false);
        } else {
            im2col(g, img, &mut col);
            gemm(wm, MatRef::new(&col, patch, ohw), dst, false);
        }
        if let Some(b) = b {
            for (o, row) in dst.chunks_exact_mut(ohw).enumerate() {
                row.iter_mut().for_each(|v| *v += b[o]);
            }
        }
    }
    out
}

/// Accumulates whichever of `dx`, `dw`, `db` are requested.
pub fn conv2d_backward<T: Real>(
    g: &ConvGeom,
    x: &[T],
    w: &[T],
    dy: &[T],
    mut dx: Option<&mut [T]>,
    mut dw: Option<&mut [T]>,
    db: Option<&mut [T]>,
) {
    let (patch, ohw) = (g.patch(), g.spatial_out());
    let img_len = g.c * g.h * g.w;
    if let Some(db) = db {
        for n in 0..g.n {
            for (o, row) in dy[n * g.oc * ohw..(n + 1) * g.oc * ohw].chunks_exact(ohw).enumerate() {
                db[o] += row.iter().copied().sum::<T>();
            }
        }
    }
    if dx.is_none() && dw.is_none() {
        return;
    }
    let pointwise = g.is_pointwise();
    let mut col = if pointwise { Vec::new() } else { vec![T::zero(); patch * ohw] };
    let wm = MatRef::new(w, g.oc, patch);
    for n in 0..g.n {
        let dyn_ = MatRef::new(&dy[n * g.oc * ohw..(n + 1) * g.oc * ohw], g.oc, ohw);
        let img = &x[n * img_len..(n + 1) * img_len];
        if let Some(dw) = dw.as_deref_mut() {
            if pointwise {
                gemm(dyn_, MatRef::new(img, patch, ohw).t(), dw, true);
            } else {
                im2col(g, img, &mut col);
                gemm(dyn_, MatRef::new(&col, patch, ohw).t(), dw, true);
            }
        }
        if let Some(dx) = dx.as_deref_mut() {
            let dimg = &mut dx[n * img_len..(n + 1) * img_len];
            if pointwise {
                gemm(wm.t(), dyn_, dimg, true);
            } else {
                gemm(wm.t(), dyn_, &mut col, false);
                col2im_add(g, &col, dimg);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct 7-loop cross-correlation, used as the reference for the im2col path.
    fn direct(g: &ConvGeom, x: &[f64], w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; g.n * g.oc * g.oh * g.ow];
        for n in 0..g.n {
            for o in 0..g.oc {
                for oy in 0..g.oh {
                    for ox in 0..g.ow {
                        let mut s = 0.0;
                        for c in 0..g.c {
                            for ki in 0..g.kh {
                                for kj in 0..g.kw {
                                    let iy = (oy * g.stride + ki) as isize - g.pad_h as isize;
                                    let ix = (ox * g.stride + kj) as isize - g.pad_w as isize;
                                    if iy < 0 || ix < 0 || iy >= g.h as isize || ix >= g.w as isize {
                                        continue;
                                    }
                                    s += x[((n * g.c + c) * g.h + iy as usize) * g.w + ix as usize]
                                        * w[((o * g.c + c) * g.kh + ki) * g.kw + kj];
                                }
                            }
                        }
                        out[((n * g.oc + o) * g.oh + oy) * g.ow + ox] = s;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn im2col_path_matches_direct_loops() {
        let cases = [
            ([2, 3, 7, 6], [4, 3, 3, 3], 1, Padding::Same),
            ([1, 2, 7, 6], [3, 2, 3, 3], 2, Padding::Same),
            ([1, 2, 8, 8], [3, 2, 5, 5], 2, Padding::Same),
            ([2, 2, 5, 7], [1, 2, 2, 3], 1, Padding::Valid),
            ([1, 4, 5, 5], [2, 4, 1, 1], 2, Padding::Valid),
            ([1, 4, 5, 5], [2, 4, 1, 1], 1, Padding::Same),
        ];
        for (xs, ws, stride, pad) in cases {
            let g = ConvGeom::new(&xs, &ws, stride, pad).unwrap();
            let x: Vec<f64> = (0..xs.iter().product::<usize>()).map(|i| ((i * 37 % 23) as f64) - 11.0).collect();
            let w: Vec<f64> = (0..ws.iter().product::<usize>()).map(|i| ((i * 13 % 7) as f64) * 0.25 - 0.7).collect();
            let fast = conv2d_forward(&g, &x, &w, None);
            assert_eq!(fast, direct(&g, &x, &w), "{xs:?} {ws:?} s{stride} {pad:?}");
        }
    }

    #[test]
    fn geometry_errors() {
        assert!(matches!(ConvGeom::new(&[1, 2, 4, 4], &[1, 3, 3, 3], 1, Padding::Same), Err(TensorError::Shape { .. })));
        assert!(matches!(ConvGeom::new(&[1, 1, 2, 2], &[1, 1, 3, 3], 1, Padding::Valid), Err(TensorError::EmptyOutput { .. })));
        assert!(ConvGeom::new(&[1, 1, 4, 4], &[1, 1, 2, 2], 1, Padding::Same).is_err());
        assert!(ConvGeom::new(&[1, 1, 4, 4], &[1, 1, 3, 3], 0, Padding::Same).is_err());
        let g = ConvGeom::new(&[1, 1, 32, 32], &[1, 1, 3, 3], 2, Padding::Same).unwrap();
        assert_eq!((g.oh, g.ow), (16, 16));
    }
}
