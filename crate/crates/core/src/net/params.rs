use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::spec::{ModelSpec, ParamKind};
use super::NetError;
use crate::ops::norm::RunningStats;
use crate::real::Real;
use crate::rng::XorShift64Star;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub value: Tensor<T>,
    pub trainable: bool,
}

/// Named parameters plus batch-norm running statistics keyed by layer.
///
/// Parameter names are `layer.weight`, `layer.bias`, `layer.gamma` and
/// `layer.beta`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore<T> {
    pub params: BTreeMap<String, Param<T>>,
    pub running: BTreeMap<String, RunningStats<T>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreezePreset {
    /// The classification head only.
    HeadOnly,
    All,
    /// The last residual stage (or equivalent) plus the head.
    LastBlock,
}

/// Which parameters [`ParamStore::set_trainable`] touches.
///
/// A prefix matches a parameter when it equals the parameter name or is
/// followed in it by a `.`, so `s3b3` covers `s3b3.a.conv.weight` but `fc`
/// does not cover `fc2.weight`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Selector {
    Preset(FreezePreset),
    Prefixes(Vec<String>),
}

impl Selector {
    pub fn prefixes(list: &[&str]) -> Self {
        Selector::Prefixes(list.iter().map(|s| s.to_string()).collect())
    }
}

pub fn prefix_matches(prefix: &str, name: &str) -> bool {
    let prefix = prefix.trim_end_matches('.');
    name == prefix || (name.starts_with(prefix) && name.as_bytes().get(prefix.len()) == Some(&b'.'))
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

impl<T: Real> ParamStore<T> {
    /// Kaiming-normal conv and dense weights (std `sqrt(2 / fan_in)`), zero
    /// biases, unit gamma, zero beta, running mean 0 and variance 1. Draws
    /// come from one generator in layer order.
    pub fn init(spec: &ModelSpec, seed: u64) -> Result<Self, NetError> {
        let mut rng = XorShift64Star::new(seed);
        let mut params = BTreeMap::new();
        for slot in spec.param_slots()? {
            let n: usize = slot.shape.iter().product();
            let data: Vec<T> = match slot.kind {
                ParamKind::Weight => {
                    let std = libm::sqrt(2.0 / slot.fan_in as f64);
                    (0..n).map(|_| T::from_f64(rng.normal() * std)).collect()
                }
                ParamKind::Bias | ParamKind::Beta => alloc::vec![T::zero(); n],
                ParamKind::Gamma => alloc::vec![T::one(); n],
            };
            params.insert(slot.name, Param { value: Tensor::from_vec(&slot.shape, data)?, trainable: true });
        }
        let running = spec.batch_norm_layers()?.into_iter().map(|(name, c)| (name, RunningStats::new(c))).collect();
        Ok(Self { params, running })
    }

    /// Checks that exactly the parameters `spec` needs are present with the right shapes.
    pub fn validate(&self, spec: &ModelSpec) -> Result<(), NetError> {
        let slots = spec.param_slots()?;
        for slot in &slots {
            let p = self.params.get(&slot.name).ok_or_else(|| NetError::MissingParam(slot.name.clone()))?;
            if p.value.shape() != slot.shape.as_slice() {
                return Err(NetError::ParamShape {
                    name: slot.name.clone(),
                    expected: slot.shape.clone(),
                    got: p.value.shape().to_vec(),
                });
            }
        }
        if let Some(extra) = self.params.keys().find(|k| !slots.iter().any(|s| &s.name == *k)) {
            return Err(NetError::InvalidArgument(format!("unexpected parameter `{extra}`")));
        }
        let bns = spec.batch_norm_layers()?;
        for (layer, c) in &bns {
            let name = format!("{layer}.running_mean");
            let rs = self.running.get(layer).ok_or(NetError::MissingParam(name.clone()))?;
            if rs.mean.len() != *c || rs.var.len() != *c {
                return Err(NetError::ParamShape { name, expected: alloc::vec![*c], got: alloc::vec![rs.mean.len()] });
            }
        }
        if let Some(extra) = self.running.keys().find(|k| !bns.iter().any(|(l, _)| &l == k)) {
            return Err(NetError::InvalidArgument(format!("unexpected running statistics for `{extra}`")));
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Param<T>> {
        self.params.get(name)
    }

    pub fn value(&self, name: &str) -> Result<&Tensor<T>, NetError> {
        self.params.get(name).map(|p| &p.value).ok_or_else(|| NetError::MissingParam(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn element_count(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    pub fn trainable_names(&self) -> Vec<&str> {
        self.params.iter().filter(|(_, p)| p.trainable).map(|(n, _)| n.as_str()).collect()
    }

    /// Sets the trainable flag of every matching parameter; returns how many matched.
    pub fn set_trainable(&mut self, spec: &ModelSpec, selector: &Selector, flag: bool) -> Result<usize, NetError> {
        let prefixes: Vec<String> = match selector {
            Selector::Preset(FreezePreset::All) => {
                for p in self.params.values_mut() {
                    p.trainable = flag;
                }
                return if self.params.is_empty() { Err(NetError::SelectorMatchedNothing) } else { Ok(self.params.len()) };
            }
            Selector::Preset(FreezePreset::HeadOnly) => spec.groups.head.clone(),
            Selector::Preset(FreezePreset::LastBlock) => spec.groups.last_block.clone(),
            Selector::Prefixes(list) => list.clone(),
        };
        let mut hits = 0;
        for (name, p) in self.params.iter_mut() {
            if prefixes.iter().any(|pre| prefix_matches(pre, name)) {
                p.trainable = flag;
                hits += 1;
            }
        }
        if hits == 0 {
            return Err(NetError::SelectorMatchedNothing);
        }
        Ok(hits)
    }

    /// Freezes everything, then unfreezes what `selector` picks.
    pub fn train_only(&mut self, spec: &ModelSpec, selector: &Selector) -> Result<usize, NetError> {
        self.set_trainable(spec, &Selector::Preset(FreezePreset::All), false)?;
        self.set_trainable(spec, selector, true)
    }

    /// FNV-1a 64 over each parameter (name bytes then f32 little-endian
    /// values, in name order) followed by each layer's running mean and
    /// variance under the names `layer.running_mean` / `layer.running_var`.
    pub fn checksum(&self) -> u64 {
        self.checksum_where(|_| true, |_| true)
    }

    /// Same hash restricted to state that training cannot touch: frozen
    /// parameters, plus running statistics of batch-norm layers whose
    /// gamma and beta are both frozen.
    pub fn frozen_checksum(&self) -> u64 {
        let frozen = |name: &str| self.params.get(name).is_none_or(|p| !p.trainable);
        self.checksum_where(
            |p| !p.trainable,
            |layer| frozen(&format!("{layer}.gamma")) && frozen(&format!("{layer}.beta")),
        )
    }

    fn checksum_where(&self, keep: impl Fn(&Param<T>) -> bool, keep_layer: impl Fn(&str) -> bool) -> u64 {
        let mut h = FNV_OFFSET;
        let mut feed = |name: &str, values: &[T]| {
            h = fnv1a(h, name.as_bytes());
            for v in values {
                h = fnv1a(h, &(v.as_f64() as f32).to_le_bytes());
            }
        };
        for (name, p) in self.params.iter().filter(|(_, p)| keep(p)) {
            feed(name, p.value.data());
        }
        for (layer, rs) in self.running.iter().filter(|(l, _)| keep_layer(l)) {
            feed(&format!("{layer}.running_mean"), &rs.mean);
            feed(&format!("{layer}.running_var"), &rs.var);
        }
        h
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|(n, p)| (n.clone(), Param { value: p.value.cast(), trainable: p.trainable }))
                .collect(),
            running: self
                .running
                .iter()
                .map(|(n, rs)| {
                    let conv = |v: &[T]| v.iter().map(|x| U::from_f64(x.as_f64())).collect();
                    (n.clone(), RunningStats { mean: conv(&rs.mean), var: conv(&rs.var) })
                })
                .collect(),
        }
    }
}
