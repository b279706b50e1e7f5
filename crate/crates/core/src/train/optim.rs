use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::TrainError;
use crate::net::{Grads, ParamStore};
use crate::real::Real;

fn grad_for<'a, T: Real>(grads: &'a Grads<T>, name: &str, len: usize) -> Result<&'a [T], TrainError> {
    let g = grads.get(name).ok_or_else(|| TrainError::MissingGradient(name.into()))?;
    if g.len() != len {
        return Err(TrainError::StateMismatch(name.into()));
    }
    Ok(g.data())
}

/// `p -= lr * g` for trainable parameters; frozen ones are never touched.
pub fn sgd_step<T: Real>(params: &mut ParamStore<T>, grads: &Grads<T>, lr: f64) -> Result<(), TrainError> {
    let lr = T::from_f64(lr);
    for (name, p) in params.params.iter_mut().filter(|(_, p)| p.trainable) {
        let g = grad_for(grads, name, p.value.len())?;
        for (v, gi) in p.value.data_mut().iter_mut().zip(g) {
            *v -= lr * *gi;
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moments per parameter and the shared step count.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: BTreeMap<String, Vec<T>>,
    pub v: BTreeMap<String, Vec<T>>,
    pub t: u64,
}

impl<T: Real> AdamState<T> {
    /// Zero moments shaped like every parameter in `params`.
    pub fn new(params: &ParamStore<T>) -> Self {
        let zeros: BTreeMap<String, Vec<T>> =
            params.params.iter().map(|(n, p)| (n.clone(), alloc::vec![T::zero(); p.value.len()])).collect();
        Self { m: zeros.clone(), v: zeros, t: 0 }
    }
}

/// Bias-corrected Adam on trainable parameters.
///
/// `m = b1 m + (1 - b1) g`, `v = b2 v + (1 - b2) g²`,
/// `p -= lr · (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)`.
pub fn adam_step<T: Real>(
    params: &mut ParamStore<T>,
    grads: &Grads<T>,
    state: &mut AdamState<T>,
    lr: f64,
    hyper: AdamHyper,
) -> Result<(), TrainError> {
    for (name, p) in params.params.iter().filter(|(_, p)| p.trainable) {
        grad_for(grads, name, p.value.len())?;
        let ok = |s: &BTreeMap<String, Vec<T>>| s.get(name).is_some_and(|x| x.len() == p.value.len());
        if !ok(&state.m) || !ok(&state.v) {
            return Err(TrainError::StateMismatch(name.clone()));
        }
    }
    state.t += 1;
    let t = state.t as f64;
    let (b1, b2) = (T::from_f64(hyper.beta1), T::from_f64(hyper.beta2));
    let c1 = T::from_f64(1.0 - libm::pow(hyper.beta1, t));
    let c2 = T::from_f64(1.0 - libm::pow(hyper.beta2, t));
    let (lr, eps, one) = (T::from_f64(lr), T::from_f64(hyper.eps), T::one());
    for (name, p) in params.params.iter_mut().filter(|(_, p)| p.trainable) {
        let g = grads[name].data();
        let m = state.m.get_mut(name).expect("checked above");
        let v = state.v.get_mut(name).expect("checked above");
        for (i, value) in p.value.data_mut().iter_mut().enumerate() {
            m[i] = b1 * m[i] + (one - b1) * g[i];
            v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            *value -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub enum Optimizer<T> {
    Sgd,
    Adam { state: AdamState<T>, hyper: AdamHyper },
}

impl<T: Real> Optimizer<T> {
    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &Grads<T>, lr: f64) -> Result<(), TrainError> {
        match self {
            Optimizer::Sgd => sgd_step(params, grads, lr),
            Optimizer::Adam { state, hyper } => adam_step(params, grads, state, lr, *hyper),
        }
    }
}
