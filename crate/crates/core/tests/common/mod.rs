//! Test-only oracles shared by integration tests.
#![allow(dead_code)]

use diacnn_core::rng::XorShift64Star;
use diacnn_core::{Graph, Tensor, Var};

/// `|a - n| / max(1e-8, |a| + |n|)`.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

pub fn random_tensor(rng: &mut XorShift64Star, shape: &[usize], scale: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| scale * rng.normal()).collect()).unwrap()
}

/// Reduces any tensor to a scalar through fixed pseudo-random weights so
/// every output element contributes a distinct coefficient.
pub fn project(g: &mut Graph<f64>, y: Var, seed: u64) -> Var {
    let m = g.value(y).len();
    let flat = g.reshape(y, &[1, m]).unwrap();
    let mut rng = XorShift64Star::new(seed);
    let w = g.leaf(random_tensor(&mut rng, &[m, 1], 1.0), false);
    let z = g.linear(flat, w, None).unwrap();
    g.sum(z).unwrap()
}

pub struct GradReport {
    pub max_rel_err: f64,
    pub checked: usize,
}

/// Central finite differences against the tape's analytic gradients.
///
/// `coords` limits how many coordinates per input are probed (evenly strided);
/// `None` probes all of them.
pub fn gradcheck<F>(inputs: &[Tensor<f64>], f: F, step: f64, coords: Option<usize>) -> GradReport
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Var,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone(), true)).collect();
    let root = f(&mut g, &vars);
    g.backward(root).unwrap();
    let analytic: Vec<Tensor<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(v, t)| g.grad(*v).cloned().unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();

    let eval = |perturbed: &[Tensor<f64>]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = perturbed.iter().map(|t| g.leaf(t.clone(), false)).collect();
        let root = f(&mut g, &vars);
        g.value(root).item()
    };

    let mut report = GradReport { max_rel_err: 0.0, checked: 0 };
    for (i, t) in inputs.iter().enumerate() {
        let n = t.len();
        let stride = coords.map_or(1, |c| (n / c.max(1)).max(1));
        for j in (0..n).step_by(stride) {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += step;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= step;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * step);
            let e = rel_err(analytic[i].data()[j], numeric);
            report.max_rel_err = report.max_rel_err.max(e);
            report.checked += 1;
        }
    }
    report
}
