use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::params::ParamStore;
use super::spec::{LayerKind, ModelSpec};
use super::NetError;
use crate::autograd::{Graph, Var};
use crate::ops::norm::RunningStats;
use crate::real::Real;
use crate::tensor::Tensor;

pub use crate::autograd::BnMode as Mode;

/// Gradients of trainable parameters, by parameter name.
pub type Grads<T> = BTreeMap<String, Tensor<T>>;

#[derive(Debug)]
pub struct ForwardOutput<T> {
    /// Every layer's node, by layer name.
    pub nodes: BTreeMap<String, Var>,
    pub output: Var,
    pub penultimate: Option<Var>,
    /// Auxiliary logits with their loss weights.
    pub aux: Vec<(Var, f64)>,
    /// Parameter leaves, by parameter name.
    pub params: BTreeMap<String, Var>,
    /// Running statistics after this pass. Only layers that ran on batch
    /// statistics appear here.
    pub running_updates: BTreeMap<String, RunningStats<T>>,
}

impl<T: Real> ForwardOutput<T> {
    pub fn node(&self, layer: &str) -> Result<Var, NetError> {
        self.nodes.get(layer).copied().ok_or_else(|| NetError::UnknownLayer(layer.to_string()))
    }

    /// Gradients accumulated on trainable parameter leaves.
    pub fn grads(&self, g: &Graph<T>) -> Grads<T> {
        self.params
            .iter()
            .filter_map(|(name, &v)| g.grad(v).map(|t| (name.clone(), t.clone())))
            .collect()
    }
}

/// Evaluates `spec` on the node `input` (shape `N×C×H×W`).
///
/// Parameters enter the graph as leaves that require gradients exactly when
/// they are trainable. A batch-norm layer uses batch statistics only when
/// `mode` is [`Mode::Train`] and its gamma or beta is trainable; a frozen
/// normalization layer always runs on its running statistics. The store is
/// not modified; new running statistics are returned in the output.
pub fn forward<T: Real>(
    spec: &ModelSpec,
    params: &ParamStore<T>,
    g: &mut Graph<T>,
    input: Var,
    mode: Mode,
) -> Result<ForwardOutput<T>, NetError> {
    let shape = g.value(input).shape();
    if shape.len() != 4 || shape[1..] != spec.input_shape {
        let mut expected = alloc::vec![0];
        expected.extend_from_slice(&spec.input_shape);
        return Err(NetError::InputShape { expected, got: shape.to_vec() });
    }
    let mut nodes: BTreeMap<String, Var> = BTreeMap::new();
    let mut leaves: BTreeMap<String, Var> = BTreeMap::new();
    let mut running_updates = BTreeMap::new();
    let mut leaf = |g: &mut Graph<T>, name: String| -> Result<Var, NetError> {
        let p = params.get(&name).ok_or_else(|| NetError::MissingParam(name.clone()))?;
        let v = g.leaf(p.value.clone(), p.trainable);
        leaves.insert(name, v);
        Ok(v)
    };
    for layer in &spec.layers {
        let ins: Vec<Var> = layer
            .inputs
            .iter()
            .map(|n| nodes.get(n).copied().ok_or_else(|| NetError::UnknownLayer(n.clone())))
            .collect::<Result<_, _>>()?;
        let name = &layer.name;
        let v = match &layer.op {
            LayerKind::Input => input,
            LayerKind::Conv2d { stride, padding, .. } => {
                let w = leaf(g, format!("{name}.weight"))?;
                let b = leaf(g, format!("{name}.bias"))?;
                g.conv2d(ins[0], w, Some(b), *stride, *padding)?
            }
            LayerKind::BatchNorm { eps, momentum } => {
                let gamma = leaf(g, format!("{name}.gamma"))?;
                let beta = leaf(g, format!("{name}.beta"))?;
                let mut stats = params
                    .running
                    .get(name)
                    .cloned()
                    .ok_or_else(|| NetError::MissingParam(format!("{name}.running_mean")))?;
                let live = mode == Mode::Train && (g.requires_grad(gamma) || g.requires_grad(beta));
                let bn_mode = if live { Mode::Train } else { Mode::Infer };
                let y = g.batch_norm(ins[0], gamma, beta, &mut stats, bn_mode, T::from_f64(*eps), T::from_f64(*momentum))?;
                if live {
                    running_updates.insert(name.clone(), stats);
                }
                y
            }
            LayerKind::Relu => g.relu(ins[0])?,
            LayerKind::MaxPool { window, stride, padding } => g.max_pool2d(ins[0], *window, *stride, *padding)?,
            LayerKind::AvgPool { window, stride } => g.avg_pool2d(ins[0], *window, *stride)?,
            LayerKind::GlobalAvgPool => g.global_avg_pool(ins[0])?,
            LayerKind::Flatten => g.flatten(ins[0])?,
            LayerKind::Dense { .. } => {
                let w = leaf(g, format!("{name}.weight"))?;
                let b = leaf(g, format!("{name}.bias"))?;
                g.linear(ins[0], w, Some(b))?
            }
            LayerKind::Add => g.add(ins[0], ins[1])?,
            LayerKind::Concat => g.concat_channels(&ins)?,
        };
        nodes.insert(name.clone(), v);
    }
    let lookup = |n: &str| nodes.get(n).copied().ok_or_else(|| NetError::UnknownLayer(n.to_string()));
    let output = lookup(&spec.output)?;
    let penultimate = spec.penultimate.as_deref().map(lookup).transpose()?;
    let aux = spec.aux_heads.iter().map(|a| Ok((lookup(&a.layer)?, a.weight))).collect::<Result<_, NetError>>()?;
    Ok(ForwardOutput { nodes, output, penultimate, aux, params: leaves, running_updates })
}

/// Mean softmax cross-entropy of the main logits plus weighted auxiliary terms.
pub fn classification_loss<T: Real>(g: &mut Graph<T>, out: &ForwardOutput<T>, labels: &[usize]) -> Result<Var, NetError> {
    let mut loss = g.softmax_cross_entropy(out.output, labels)?;
    for &(logits, weight) in &out.aux {
        let l = g.softmax_cross_entropy(logits, labels)?;
        let l = g.scale(l, T::from_f64(weight))?;
        loss = g.add(loss, l)?;
    }
    Ok(loss)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction<T> {
    pub logits: Tensor<T>,
    pub probs: Tensor<T>,
    pub penultimate: Option<Tensor<T>>,
}

/// Result of one training-mode pass.
#[derive(Clone, Debug)]
pub struct StepOutput<T> {
    pub loss: f64,
    pub logits: Tensor<T>,
    pub grads: Grads<T>,
}

/// A classifier: architecture plus parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub spec: ModelSpec,
    pub params: ParamStore<T>,
}

impl<T: Real> Model<T> {
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self, NetError> {
        let params = ParamStore::init(&spec, seed)?;
        Ok(Self { spec, params })
    }

    pub fn from_parts(spec: ModelSpec, params: ParamStore<T>) -> Result<Self, NetError> {
        params.validate(&spec)?;
        Ok(Self { spec, params })
    }

    fn require_classifier(&self) -> Result<(), NetError> {
        if self.spec.num_classes.is_none() {
            return Err(NetError::NotAClassifier);
        }
        Ok(())
    }

    /// Inference-mode logits, probabilities and penultimate features.
    pub fn predict(&self, batch: &Tensor<T>) -> Result<Prediction<T>, NetError> {
        self.require_classifier()?;
        let mut g = Graph::new();
        let x = g.leaf(batch.clone(), false);
        let out = forward(&self.spec, &self.params, &mut g, x, Mode::Infer)?;
        let p = g.softmax(out.output)?;
        Ok(Prediction {
            logits: g.value(out.output).clone(),
            probs: g.value(p).clone(),
            penultimate: out.penultimate.map(|v| g.value(v).clone()),
        })
    }

    /// Inference-mode loss and probabilities, without gradients.
    pub fn evaluate(&self, batch: &Tensor<T>, labels: &[usize]) -> Result<(f64, Tensor<T>), NetError> {
        self.require_classifier()?;
        let mut g = Graph::new();
        let x = g.leaf(batch.clone(), false);
        let out = forward(&self.spec, &self.params, &mut g, x, Mode::Infer)?;
        let loss = g.softmax_cross_entropy(out.output, labels)?;
        let p = g.softmax(out.output)?;
        Ok((g.value(loss).item().as_f64(), g.value(p).clone()))
    }

    /// Training-mode pass: loss (including auxiliary heads), gradients of
    /// trainable parameters, and running-statistic updates folded into the store.
    pub fn train_step(&mut self, batch: &Tensor<T>, labels: &[usize]) -> Result<StepOutput<T>, NetError> {
        self.require_classifier()?;
        let mut g = Graph::new();
        let x = g.leaf(batch.clone(), false);
        let out = forward(&self.spec, &self.params, &mut g, x, Mode::Train)?;
        let loss = classification_loss(&mut g, &out, labels)?;
        g.backward(loss)?;
        let step = StepOutput { loss: g.value(loss).item().as_f64(), logits: g.value(out.output).clone(), grads: out.grads(&g) };
        self.params.running.extend(out.running_updates);
        Ok(step)
    }
}
