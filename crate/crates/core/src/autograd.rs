//! Reverse-mode automatic differentiation over an append-only tape.
//!
//! Every op appends a node whose inputs are strictly earlier nodes, so tape
//! order is a topological order and [`Graph::backward`] walks it once in
//! reverse. Leaf gradients accumulate across `backward` calls until
//! [`Graph::zero_grad`]; interior gradients are transient per call.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::ops::activation::{log_softmax_nll, relu_backward, relu_forward, softmax_backward, softmax_rows};
use crate::ops::conv::{conv2d_backward, conv2d_forward, ConvGeom, Padding};
use crate::ops::dense::{linear_backward, linear_forward};
use crate::ops::norm::{batch_moments, batch_norm_backward, normalize, BnLayout, RunningStats};
use crate::ops::pool::{
    avgpool_backward, avgpool_forward, global_avg_backward, global_avg_forward, maxpool_backward, maxpool_forward,
    PoolGeom,
};
use crate::real::Real;
use crate::tensor::{arg_err, finite_checks_enabled, shape_err, Tensor, TensorError};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnMode {
    /// Normalize by batch statistics and fold them into the running stats.
    Train,
    /// Normalize by the running stats only.
    Infer,
}

enum Op<T> {
    Leaf,
    Conv2d { x: Var, w: Var, b: Option<Var>, geom: ConvGeom },
    Relu { x: Var },
    MaxPool { x: Var, argmax: Vec<usize> },
    AvgPool { x: Var, geom: PoolGeom },
    GlobalAvgPool { x: Var, inner: usize },
    BatchNorm { x: Var, gamma: Var, beta: Var, layout: BnLayout, xhat: Vec<T>, inv_std: Vec<T>, batch_stats: bool },
    Linear { x: Var, w: Var, b: Option<Var> },
    Add { a: Var, b: Var },
    Scale { x: Var, factor: T },
    Concat { parts: Vec<Var> },
    Reshape { x: Var },
    Softmax { x: Var },
    CrossEntropy { probs: Var, labels: Vec<usize> },
    SoftmaxCrossEntropy { logits: Var, labels: Vec<usize>, probs: Vec<T> },
    Sum { x: Var },
}

impl<T> Op<T> {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => Vec::new(),
            Op::Conv2d { x, w, b, .. } | Op::Linear { x, w, b } => {
                let mut v = vec![*x, *w];
                v.extend(b.iter().copied());
                v
            }
            Op::BatchNorm { x, gamma, beta, .. } => vec![*x, *gamma, *beta],
            Op::Add { a, b } => vec![*a, *b],
            Op::Concat { parts } => parts.clone(),
            Op::CrossEntropy { probs, .. } => vec![*probs],
            Op::SoftmaxCrossEntropy { logits, .. } => vec![*logits],
            Op::Relu { x }
            | Op::MaxPool { x, .. }
            | Op::AvgPool { x, .. }
            | Op::GlobalAvgPool { x, .. }
            | Op::Scale { x, .. }
            | Op::Reshape { x }
            | Op::Softmax { x }
            | Op::Sum { x } => vec![*x],
        }
    }
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
    grad: Option<Tensor<T>>,
}

pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn check_finite<T: Real>(op: &'static str, data: &[T]) -> Result<(), TensorError> {
    if finite_checks_enabled() && data.iter().any(|v| !v.is_finite()) {
        return Err(TensorError::NonFinite { op });
    }
    Ok(())
}

/// Mutable gradient buffer for `v`, or `None` when `v` needs no gradient.
fn slot<'a, T: Real>(grads: &'a mut [Option<Vec<T>>], nodes: &[Node<T>], v: Var) -> Option<&'a mut [T]> {
    let node = &nodes[v.0];
    if !node.requires_grad {
        return None;
    }
    Some(grads[v.0].get_or_insert_with(|| vec![T::zero(); node.value.len()]).as_mut_slice())
}

fn add_into<T: Real>(dst: Option<&mut [T]>, src: &[T]) {
    if let Some(d) = dst {
        d.iter_mut().zip(src).for_each(|(a, b)| *a += *b);
    }
}

/// `[n, c, inner]` view of a rank-2 (`N×C`) or rank-4 (`N×C×H×W`) shape.
fn channel_layout(op: &'static str, shape: &[usize]) -> Result<BnLayout, TensorError> {
    match shape {
        [n, c] => Ok(BnLayout { n: *n, c: *c, inner: 1 }),
        [n, c, h, w] => Ok(BnLayout { n: *n, c: *c, inner: h * w }),
        _ => Err(shape_err(op, format!("expected N×C or N×C×H×W, got {shape:?}"))),
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad, grad: None });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn zero_grad(&mut self) {
        self.nodes.iter_mut().for_each(|n| n.grad = None);
    }

    fn push(&mut self, op_name: &'static str, value: Tensor<T>, op: Op<T>) -> Result<Var, TensorError> {
        check_finite(op_name, value.data())?;
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { value, op, requires_grad, grad: None });
        Ok(Var(self.nodes.len() - 1))
    }

    fn check_var(&self, op: &'static str, v: Var) -> Result<(), TensorError> {
        if v.0 >= self.nodes.len() {
            return Err(arg_err(op, format!("unknown node {}", v.0)));
        }
        Ok(())
    }

    /// Cross-correlation of `x` (N×C×H×W) with `w` (O×C×Kh×Kw) plus per-channel bias.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, padding: Padding) -> Result<Var, TensorError> {
        const OP: &str = "conv2d";
        self.check_var(OP, x)?;
        self.check_var(OP, w)?;
        let geom = ConvGeom::new(self.value(x).shape(), self.value(w).shape(), stride, padding)?;
        if let Some(b) = b {
            self.check_var(OP, b)?;
            if self.value(b).len() != geom.oc {
                return Err(shape_err(OP, format!("bias has {} entries for {} filters", self.value(b).len(), geom.oc)));
            }
        }
        let out = conv2d_forward(
            &geom,
            self.value(x).data(),
            self.value(w).data(),
            b.map(|b| self.value(b).data()),
        );
        let value = Tensor::from_vec(&geom.out_shape(), out)?;
        self.push(OP, value, Op::Conv2d { x, w, b, geom })
    }

    pub fn relu(&mut self, x: Var) -> Result<Var, TensorError> {
        self.check_var("relu", x)?;
        let v = self.value(x);
        let value = Tensor::from_vec(v.shape(), relu_forward(v.data()))?;
        self.push("relu", value, Op::Relu { x })
    }

    pub fn max_pool2d(&mut self, x: Var, window: usize, stride: usize, padding: Padding) -> Result<Var, TensorError> {
        self.check_var("max_pool2d", x)?;
        let geom = PoolGeom::new(self.value(x).shape(), window, stride, padding)?;
        let (out, argmax) = maxpool_forward(&geom, self.value(x).data());
        let value = Tensor::from_vec(&geom.out_shape(), out)?;
        self.push("max_pool2d", value, Op::MaxPool { x, argmax })
    }

    /// Windowed average pooling without padding.
    pub fn avg_pool2d(&mut self, x: Var, window: usize, stride: usize) -> Result<Var, TensorError> {
        self.check_var("avg_pool2d", x)?;
        let geom = PoolGeom::new(self.value(x).shape(), window, stride, Padding::Valid)?;
        let value = Tensor::from_vec(&geom.out_shape(), avgpool_forward(&geom, self.value(x).data()))?;
        self.push("avg_pool2d", value, Op::AvgPool { x, geom })
    }

    /// N×C×H×W → N×C spatial mean.
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var, TensorError> {
        const OP: &str = "global_avg_pool";
        self.check_var(OP, x)?;
        let shape = self.value(x).shape();
        let [n, c, h, w] = shape else {
            return Err(shape_err(OP, format!("expected N×C×H×W, got {shape:?}")));
        };
        let (n, c, inner) = (*n, *c, h * w);
        let value = Tensor::from_vec(&[n, c], global_avg_forward(self.value(x).data(), n * c, inner))?;
        self.push(OP, value, Op::GlobalAvgPool { x, inner })
    }

    /// Per-channel batch normalization over axis 1.
    ///
    /// In [`BnMode::Train`] the batch mean and population variance are used and
    /// folded into `stats` with `momentum`; in [`BnMode::Infer`] `stats` is read only.
    #[allow(clippy::too_many_arguments)]
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        stats: &mut RunningStats<T>,
        mode: BnMode,
        eps: T,
        momentum: T,
    ) -> Result<Var, TensorError> {
        const OP: &str = "batch_norm";
        for v in [x, gamma, beta] {
            self.check_var(OP, v)?;
        }
        let layout = channel_layout(OP, self.value(x).shape())?;
        if layout.n == 0 {
            return Err(arg_err(OP, "empty batch"));
        }
        for (what, v) in [("gamma", gamma), ("beta", beta)] {
            if self.value(v).len() != layout.c {
                return Err(shape_err(OP, format!("{what} has {} entries for {} channels", self.value(v).len(), layout.c)));
            }
        }
        if stats.mean.len() != layout.c || stats.var.len() != layout.c {
            return Err(shape_err(OP, format!("running stats sized {} for {} channels", stats.mean.len(), layout.c)));
        }
        let xs = self.value(x).data();
        let (mean, var, batch_stats) = match mode {
            BnMode::Train => {
                let (m, v) = batch_moments(layout, xs);
                (m, v, true)
            }
            BnMode::Infer => (stats.mean.clone(), stats.var.clone(), false),
        };
        let (y, xhat, inv_std) =
            normalize(layout, xs, &mean, &var, self.value(gamma).data(), self.value(beta).data(), eps);
        let value = Tensor::from_vec(self.value(x).shape(), y)?;
        let out = self.push(OP, value, Op::BatchNorm { x, gamma, beta, layout, xhat, inv_std, batch_stats })?;
        if batch_stats {
            stats.update(&mean, &var, momentum);
        }
        Ok(out)
    }

    /// `x (N×F) · w (F×K) + b (K)`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var, TensorError> {
        const OP: &str = "linear";
        self.check_var(OP, x)?;
        self.check_var(OP, w)?;
        let (xs, ws) = (self.value(x).shape(), self.value(w).shape());
        let ([n, f], [f2, k]) = (xs, ws) else {
            return Err(shape_err(OP, format!("expected N×F input and F×K weight, got {xs:?} and {ws:?}")));
        };
        let (n, f, k) = (*n, *f, *k);
        if f != *f2 {
            return Err(shape_err(OP, format!("inner dims {f} and {f2} differ")));
        }
        if let Some(b) = b {
            self.check_var(OP, b)?;
            if self.value(b).len() != k {
                return Err(shape_err(OP, format!("bias has {} entries for {k} outputs", self.value(b).len())));
            }
        }
        let y = linear_forward(n, f, k, self.value(x).data(), self.value(w).data(), b.map(|b| self.value(b).data()));
        let value = Tensor::from_vec(&[n, k], y)?;
        self.push(OP, value, Op::Linear { x, w, b })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.check_var("add", a)?;
        self.check_var("add", b)?;
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(shape_err("add", format!("{:?} vs {:?}", va.shape(), vb.shape())));
        }
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| *x + *y).collect();
        let value = Tensor::from_vec(va.shape(), data)?;
        self.push("add", value, Op::Add { a, b })
    }

    pub fn scale(&mut self, x: Var, factor: T) -> Result<Var, TensorError> {
        self.check_var("scale", x)?;
        let value = self.value(x).map(|v| v * factor);
        self.push("scale", value, Op::Scale { x, factor })
    }

    /// Concatenation along axis 1 in argument order.
    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        const OP: &str = "concat_channels";
        let first = *parts.first().ok_or_else(|| arg_err(OP, "no inputs"))?;
        for &p in parts {
            self.check_var(OP, p)?;
        }
        let s0 = self.value(first).shape().to_vec();
        if s0.len() < 2 {
            return Err(shape_err(OP, format!("rank {} input", s0.len())));
        }
        let mut channels = 0;
        for &p in parts {
            let s = self.value(p).shape();
            if s.len() != s0.len() || s[0] != s0[0] || s[2..] != s0[2..] {
                return Err(shape_err(OP, format!("{s:?} does not match {s0:?} outside axis 1")));
            }
            channels += s[1];
        }
        let n = s0[0];
        let inner: usize = s0[2..].iter().product();
        let mut data = Vec::with_capacity(n * channels * inner);
        for b in 0..n {
            for &p in parts {
                let v = self.value(p);
                let block = v.shape()[1] * inner;
                data.extend_from_slice(&v.data()[b * block..(b + 1) * block]);
            }
        }
        let mut shape = s0;
        shape[1] = channels;
        let value = Tensor::from_vec(&shape, data)?;
        self.push(OP, value, Op::Concat { parts: parts.to_vec() })
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, TensorError> {
        self.check_var("reshape", x)?;
        let value = self.value(x).clone().reshape(shape)?;
        self.push("reshape", value, Op::Reshape { x })
    }

    /// N×… → N×(product of the rest).
    pub fn flatten(&mut self, x: Var) -> Result<Var, TensorError> {
        self.check_var("flatten", x)?;
        let s = self.value(x).shape();
        let shape = [s[0], s[1..].iter().product()];
        self.reshape(x, &shape)
    }

    /// Row-wise softmax of an N×K tensor.
    pub fn softmax(&mut self, x: Var) -> Result<Var, TensorError> {
        self.check_var("softmax", x)?;
        let v = self.value(x);
        let [_, k] = v.shape() else {
            return Err(shape_err("softmax", format!("expected N×K, got {:?}", v.shape())));
        };
        let value = Tensor::from_vec(v.shape(), softmax_rows(v.data(), *k))?;
        self.push("softmax", value, Op::Softmax { x })
    }

    fn check_labels(&self, op: &'static str, v: Var, labels: &[usize]) -> Result<(usize, usize), TensorError> {
        self.check_var(op, v)?;
        let s = self.value(v).shape();
        let [n, k] = s else {
            return Err(shape_err(op, format!("expected N×K, got {s:?}")));
        };
        if labels.len() != *n {
            return Err(shape_err(op, format!("{} labels for {n} rows", labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= *k) {
            return Err(TensorError::LabelOutOfRange { label: bad, classes: *k });
        }
        Ok((*n, *k))
    }

    /// Mean of `-ln p[label]` over rows of a probability matrix.
    pub fn cross_entropy(&mut self, probs: Var, labels: &[usize]) -> Result<Var, TensorError> {
        const OP: &str = "cross_entropy";
        let (n, k) = self.check_labels(OP, probs, labels)?;
        let p = self.value(probs).data();
        for row in p.chunks_exact(k) {
            let s: f64 = row.iter().map(|v| v.as_f64()).sum();
            if (s - 1.0).abs() > 1e-5 || row.iter().any(|v| *v < T::zero()) {
                return Err(arg_err(OP, format!("row is not a probability vector (sum {s})")));
            }
        }
        let loss = labels.iter().enumerate().map(|(i, &y)| -p[i * k + y].ln()).sum::<T>() / T::from_usize(n);
        self.push(OP, Tensor::scalar(loss), Op::CrossEntropy { probs, labels: labels.to_vec() })
    }

    /// Softmax followed by cross-entropy, with gradient `(p - onehot) / N`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var, TensorError> {
        const OP: &str = "softmax_cross_entropy";
        let (_, k) = self.check_labels(OP, logits, labels)?;
        let z = self.value(logits).data();
        let loss = log_softmax_nll(z, k, labels);
        let probs = softmax_rows(z, k);
        self.push(OP, Tensor::scalar(loss), Op::SoftmaxCrossEntropy { logits, labels: labels.to_vec(), probs })
    }

    pub fn sum(&mut self, x: Var) -> Result<Var, TensorError> {
        self.check_var("sum", x)?;
        let s = self.value(x).data().iter().copied().sum::<T>();
        self.push("sum", Tensor::scalar(s), Op::Sum { x })
    }

    /// Accumulates `d root / d leaf` into every reachable leaf that requires a gradient.
    pub fn backward(&mut self, root: Var) -> Result<(), TensorError> {
        self.check_var("backward", root)?;
        let shape = self.value(root).shape();
        if self.value(root).len() != 1 {
            return Err(TensorError::NonScalarRoot(shape.to_vec()));
        }
        for (id, node) in self.nodes[..=root.0].iter().enumerate() {
            if let Some(bad) = node.op.inputs().into_iter().find(|v| v.0 >= id) {
                return Err(TensorError::CyclicGraph { node: id, input: bad.0 });
            }
        }
        if !self.nodes[root.0].requires_grad {
            return Ok(());
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..=root.0).map(|_| None).collect();
        grads[root.0] = Some(vec![T::one()]);
        for id in (0..=root.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            if !self.nodes[id].requires_grad {
                continue;
            }
            if let Op::Leaf = self.nodes[id].op {
                let node = &mut self.nodes[id];
                match node.grad.as_mut() {
                    Some(acc) => acc.data_mut().iter_mut().zip(&g).for_each(|(a, b)| *a += *b),
                    None => node.grad = Some(Tensor::from_vec(node.value.shape(), g)?),
                }
                continue;
            }
            self.propagate(id, &g, &mut grads);
        }
        Ok(())
    }

    fn propagate(&self, id: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let nodes = &self.nodes;
        let val = |v: &Var| nodes[v.0].value.data();
        match &nodes[id].op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, geom } => {
                if let Some(b) = b {
                    conv2d_backward(geom, val(x), val(w), g, None, None, slot(grads, nodes, *b));
                }
                conv2d_backward(geom, val(x), val(w), g, None, slot(grads, nodes, *w), None);
                conv2d_backward(geom, val(x), val(w), g, slot(grads, nodes, *x), None, None);
            }
            Op::Relu { x } => {
                if let Some(dx) = slot(grads, nodes, *x) {
                    relu_backward(val(x), g, dx);
                }
            }
            Op::MaxPool { x, argmax } => {
                if let Some(dx) = slot(grads, nodes, *x) {
                    maxpool_backward(argmax, g, dx);
                }
            }
            Op::AvgPool { x, geom } => {
                if let Some(dx) = slot(grads, nodes, *x) {
                    avgpool_backward(geom, g, dx);
                }
            }
            Op::GlobalAvgPool { x, inner } => {
                if let Some(dx) = slot(grads, nodes, *x) {
                    global_avg_backward(g, *inner, dx);
                }
            }
            Op::BatchNorm { x, gamma, beta, layout, xhat, inv_std, batch_stats } => {
                let gm = val(gamma);
                batch_norm_backward(*layout, g, xhat, inv_std, gm, *batch_stats, None, slot(grads, nodes, *gamma), None);
                batch_norm_backward(*layout, g, xhat, inv_std, gm, *batch_stats, None, None, slot(grads, nodes, *beta));
                batch_norm_backward(*layout, g, xhat, inv_std, gm, *batch_stats, slot(grads, nodes, *x), None, None);
            }
            Op::Linear { x, w, b } => {
                let s = nodes[x.0].value.shape();
                let (n, f, k) = (s[0], s[1], nodes[w.0].value.shape()[1]);
                if let Some(b) = b {
                    linear_backward(n, f, k, val(x), val(w), g, None, None, slot(grads, nodes, *b));
                }
                linear_backward(n, f, k, val(x), val(w), g, None, slot(grads, nodes, *w), None);
                linear_backward(n, f, k, val(x), val(w), g, slot(grads, nodes, *x), None, None);
            }
            Op::Add { a, b } => {
                add_into(slot(grads, nodes, *a), g);
                add_into(slot(grads, nodes, *b), g);
            }
            Op::Scale { x, factor } => {
                if let Some(dx) = slot(grads, nodes, *x) {
                    dx.iter_mut().zip(g).for_each(|(d, v)| *d += *v * *factor);
                }
            }
            Op::Concat { parts } => {
                let s = nodes[id].value.shape();
                let (n, total) = (s[0], s[1]);
                let inner: usize = s[2..].iter().product();
                let mut offset = 0;
                for p in parts {
                    let c = nodes[p.0].value.shape()[1];
                    if let Some(dp) = slot(grads, nodes, *p) {
                        for bi in 0..n {
                            let src = (bi * total + offset) * inner;
                            let dst = bi * c * inner;
                            dp[dst..dst + c * inner]
                                .iter_mut()
                                .zip(&g[src..src + c * inner])
                                .for_each(|(d, v)| *d += *v);
                        }
                    }
                    offset += c;
                }
            }
            Op::Reshape { x } => add_into(slot(grads, nodes, *x), g),
            Op::Softmax { x } => {
                let k = nodes[id].value.shape()[1];
                if let Some(dx) = slot(grads, nodes, *x) {
                    softmax_backward(nodes[id].value.data(), g, k, dx);
                }
            }
            Op::CrossEntropy { probs, labels } => {
                let k = nodes[probs.0].value.shape()[1];
                let scale = g[0] / T::from_usize(labels.len());
                let p = val(probs);
                if let Some(dp) = slot(grads, nodes, *probs) {
                    for (i, &y) in labels.iter().enumerate() {
                        dp[i * k + y] -= scale / p[i * k + y];
                    }
                }
            }
            Op::SoftmaxCrossEntropy { logits, labels, probs } => {
                let k = nodes[logits.0].value.shape()[1];
                let scale = g[0] / T::from_usize(labels.len());
                if let Some(dz) = slot(grads, nodes, *logits) {
                    for (i, &y) in labels.iter().enumerate() {
                        for j in 0..k {
                            let onehot = if j == y { T::one() } else { T::zero() };
                            dz[i * k + j] += (probs[i * k + j] - onehot) * scale;
                        }
                    }
                }
            }
            Op::Sum { x } => {
                if let Some(dx) = slot(grads, nodes, *x) {
                    dx.iter_mut().for_each(|d| *d += g[0]);
                }
            }
        }
    }
}
