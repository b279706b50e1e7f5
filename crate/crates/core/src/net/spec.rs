use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::NetError;
use crate::ops::conv::ConvGeom;
use crate::ops::norm::{DEFAULT_EPS, DEFAULT_MOMENTUM};
use crate::ops::pool::PoolGeom;
use crate::ops::Padding;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    Input,
    Conv2d { out_channels: usize, kernel: usize, stride: usize, padding: Padding },
    BatchNorm { eps: f64, momentum: f64 },
    Relu,
    MaxPool { window: usize, stride: usize, padding: Padding },
    AvgPool { window: usize, stride: usize },
    GlobalAvgPool,
    Flatten,
    Dense { units: usize },
    Add,
    Concat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    pub op: LayerKind,
    pub inputs: Vec<String>,
}

/// Secondary classifier whose loss is added with `weight`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxHead {
    pub layer: String,
    pub weight: f64,
}

/// Layer-name prefixes for the freezing presets.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FreezeGroups {
    pub head: Vec<String>,
    pub last_block: Vec<String>,
}

/// A validated architecture graph. Shapes exclude the batch dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub input_shape: [usize; 3],
    pub num_classes: Option<usize>,
    pub layers: Vec<Layer>,
    pub output: String,
    pub penultimate: Option<String>,
    pub aux_heads: Vec<AuxHead>,
    pub groups: FreezeGroups,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ParamKind {
    Weight,
    Bias,
    Gamma,
    Beta,
}

impl ParamKind {
    pub fn suffix(self) -> &'static str {
        match self {
            ParamKind::Weight => "weight",
            ParamKind::Bias => "bias",
            ParamKind::Gamma => "gamma",
            ParamKind::Beta => "beta",
        }
    }
}

/// One trainable array a layer requires.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSlot {
    pub name: String,
    pub layer: String,
    pub kind: ParamKind,
    pub shape: Vec<usize>,
    /// Fan-in for weight initialisation.
    pub fan_in: usize,
}

fn shape_error(layer: &str, detail: String) -> NetError {
    NetError::Shape { layer: layer.to_string(), detail }
}

fn infer_shape(layer: &str, kind: &LayerKind, ins: &[&[usize]]) -> Result<Vec<usize>, NetError> {
    let arity = match kind {
        LayerKind::Input => 0,
        LayerKind::Add => 2,
        LayerKind::Concat => ins.len().max(1),
        _ => 1,
    };
    if ins.len() != arity {
        return Err(shape_error(layer, format!("expects {arity} inputs, got {}", ins.len())));
    }
    let spatial = |s: &[usize]| -> Result<[usize; 3], NetError> {
        match s {
            [c, h, w] => Ok([*c, *h, *w]),
            _ => Err(shape_error(layer, format!("needs a C×H×W input, got {s:?}"))),
        }
    };
    Ok(match kind {
        LayerKind::Input => return Err(shape_error(layer, "input layer is implicit".into())),
        LayerKind::Conv2d { out_channels, kernel, stride, padding } => {
            let [c, h, w] = spatial(ins[0])?;
            if *out_channels == 0 {
                return Err(shape_error(layer, "zero output channels".into()));
            }
            let g = ConvGeom::new(&[1, c, h, w], &[*out_channels, c, *kernel, *kernel], *stride, *padding)
                .map_err(|e| shape_error(layer, e.to_string()))?;
            vec![*out_channels, g.oh, g.ow]
        }
        LayerKind::MaxPool { window, stride, padding } => {
            let [c, h, w] = spatial(ins[0])?;
            let g = PoolGeom::new(&[1, c, h, w], *window, *stride, *padding).map_err(|e| shape_error(layer, e.to_string()))?;
            vec![c, g.oh, g.ow]
        }
        LayerKind::AvgPool { window, stride } => {
            let [c, h, w] = spatial(ins[0])?;
            let g = PoolGeom::new(&[1, c, h, w], *window, *stride, Padding::Valid)
                .map_err(|e| shape_error(layer, e.to_string()))?;
            vec![c, g.oh, g.ow]
        }
        LayerKind::BatchNorm { .. } | LayerKind::Relu => {
            if !(ins[0].len() == 1 || ins[0].len() == 3) {
                return Err(shape_error(layer, format!("needs C or C×H×W input, got {:?}", ins[0])));
            }
            ins[0].to_vec()
        }
        LayerKind::GlobalAvgPool => vec![spatial(ins[0])?[0]],
        LayerKind::Flatten => vec![ins[0].iter().product()],
        LayerKind::Dense { units } => {
            if ins[0].len() != 1 {
                return Err(shape_error(layer, format!("needs a flat input, got {:?}", ins[0])));
            }
            if *units == 0 {
                return Err(shape_error(layer, "zero units".into()));
            }
            vec![*units]
        }
        LayerKind::Add => {
            if ins[0] != ins[1] {
                return Err(shape_error(layer, format!("operands {:?} and {:?} differ", ins[0], ins[1])));
            }
            ins[0].to_vec()
        }
        LayerKind::Concat => {
            let first = spatial(ins[0])?;
            let mut c = 0;
            for s in ins {
                let [ci, h, w] = spatial(s)?;
                if (h, w) != (first[1], first[2]) {
                    return Err(shape_error(layer, format!("spatial {h}x{w} differs from {}x{}", first[1], first[2])));
                }
                c += ci;
            }
            vec![c, first[1], first[2]]
        }
    })
}

impl ModelSpec {
    /// Re-derives every layer's output shape, checking names and wiring.
    pub fn validate(&self) -> Result<Vec<Vec<usize>>, NetError> {
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        let mut shapes: Vec<Vec<usize>> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            if index.insert(layer.name.as_str(), i).is_some() {
                return Err(NetError::DuplicateName(layer.name.clone()));
            }
            let shape = if i == 0 {
                if layer.op != LayerKind::Input || !layer.inputs.is_empty() {
                    return Err(shape_error(&layer.name, "first layer must be the input".into()));
                }
                if self.input_shape.contains(&0) {
                    return Err(shape_error(&layer.name, format!("bad input shape {:?}", self.input_shape)));
                }
                self.input_shape.to_vec()
            } else {
                let mut ins = Vec::with_capacity(layer.inputs.len());
                for name in &layer.inputs {
                    let j = *index.get(name.as_str()).filter(|&&j| j < i).ok_or_else(|| NetError::UnknownLayer(name.clone()))?;
                    ins.push(shapes[j].as_slice());
                }
                infer_shape(&layer.name, &layer.op, &ins)?
            };
            shapes.push(shape);
        }
        let lookup = |name: &str| index.get(name).copied().ok_or_else(|| NetError::UnknownLayer(name.to_string()));
        let out = lookup(&self.output)?;
        if let Some(k) = self.num_classes {
            if shapes[out] != [k] {
                return Err(shape_error(&self.output, format!("logits shape {:?} for {k} classes", shapes[out])));
            }
        }
        if let Some(p) = &self.penultimate {
            lookup(p)?;
        }
        for aux in &self.aux_heads {
            let j = lookup(&aux.layer)?;
            if self.num_classes.is_some_and(|k| shapes[j] != [k]) {
                return Err(shape_error(&aux.layer, format!("auxiliary logits shape {:?}", shapes[j])));
            }
        }
        Ok(shapes)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    /// Trainable arrays in layer order.
    pub fn param_slots(&self) -> Result<Vec<ParamSlot>, NetError> {
        let shapes = self.validate()?;
        let mut slots = Vec::new();
        for layer in &self.layers {
            let in_shape = layer.inputs.first().and_then(|n| self.index_of(n)).map(|j| &shapes[j]);
            let mut add = |kind: ParamKind, shape: Vec<usize>, fan_in: usize| {
                slots.push(ParamSlot {
                    name: format!("{}.{}", layer.name, kind.suffix()),
                    layer: layer.name.clone(),
                    kind,
                    shape,
                    fan_in,
                });
            };
            match (&layer.op, in_shape) {
                (LayerKind::Conv2d { out_channels, kernel, .. }, Some(s)) => {
                    let fan_in = s[0] * kernel * kernel;
                    add(ParamKind::Weight, vec![*out_channels, s[0], *kernel, *kernel], fan_in);
                    add(ParamKind::Bias, vec![*out_channels], fan_in);
                }
                (LayerKind::BatchNorm { .. }, Some(s)) => {
                    add(ParamKind::Gamma, vec![s[0]], 0);
                    add(ParamKind::Beta, vec![s[0]], 0);
                }
                (LayerKind::Dense { units }, Some(s)) => {
                    add(ParamKind::Weight, vec![s[0], *units], s[0]);
                    add(ParamKind::Bias, vec![*units], s[0]);
                }
                _ => {}
            }
        }
        Ok(slots)
    }

    /// Batch-norm layers and their channel counts.
    pub fn batch_norm_layers(&self) -> Result<Vec<(String, usize)>, NetError> {
        let shapes = self.validate()?;
        Ok(self
            .layers
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l.op, LayerKind::BatchNorm { .. }))
            .map(|(i, l)| (l.name.clone(), shapes[i][0]))
            .collect())
    }

    pub fn parameter_count(&self) -> Result<usize, NetError> {
        Ok(self.param_slots()?.iter().map(|s| s.shape.iter().product::<usize>()).sum())
    }

    /// Names of convolution and dense layers.
    pub fn weighted_layers(&self) -> Vec<&str> {
        self.layers
            .iter()
            .filter(|l| matches!(l.op, LayerKind::Conv2d { .. } | LayerKind::Dense { .. }))
            .map(|l| l.name.as_str())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NetError> {
        let spec: ModelSpec =
            serde_json::from_str(text).map_err(|e| NetError::InvalidArgument(format!("architecture descriptor: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Incrementally assembles a [`ModelSpec`], checking shapes as layers are added.
#[derive(Clone, Debug)]
pub struct SpecBuilder {
    name: String,
    input_shape: [usize; 3],
    layers: Vec<Layer>,
    shapes: BTreeMap<String, Vec<usize>>,
    groups: FreezeGroups,
}

pub const INPUT: &str = "input";

impl SpecBuilder {
    pub fn new(name: &str, input_shape: [usize; 3]) -> Self {
        let mut shapes = BTreeMap::new();
        shapes.insert(INPUT.to_string(), input_shape.to_vec());
        Self {
            name: name.to_string(),
            input_shape,
            layers: vec![Layer { name: INPUT.to_string(), op: LayerKind::Input, inputs: Vec::new() }],
            shapes,
            groups: FreezeGroups::default(),
        }
    }

    pub fn input(&self) -> String {
        INPUT.to_string()
    }

    pub fn shape_of(&self, name: &str) -> Result<&[usize], NetError> {
        self.shapes.get(name).map(Vec::as_slice).ok_or_else(|| NetError::UnknownLayer(name.to_string()))
    }

    pub fn channels_of(&self, name: &str) -> Result<usize, NetError> {
        Ok(self.shape_of(name)?[0])
    }

    pub fn push(&mut self, name: &str, op: LayerKind, inputs: &[&str]) -> Result<String, NetError> {
        if self.shapes.contains_key(name) {
            return Err(NetError::DuplicateName(name.to_string()));
        }
        let ins: Vec<&[usize]> = inputs.iter().map(|n| self.shape_of(n)).collect::<Result<_, _>>()?;
        let shape = infer_shape(name, &op, &ins)?;
        self.shapes.insert(name.to_string(), shape);
        self.layers.push(Layer { name: name.to_string(), op, inputs: inputs.iter().map(|s| s.to_string()).collect() });
        Ok(name.to_string())
    }

    pub fn conv(&mut self, name: &str, input: &str, out_channels: usize, kernel: usize, stride: usize) -> Result<String, NetError> {
        self.push(name, LayerKind::Conv2d { out_channels, kernel, stride, padding: Padding::Same }, &[input])
    }

    pub fn batch_norm(&mut self, name: &str, input: &str) -> Result<String, NetError> {
        self.push(name, LayerKind::BatchNorm { eps: DEFAULT_EPS, momentum: DEFAULT_MOMENTUM }, &[input])
    }

    pub fn relu(&mut self, name: &str, input: &str) -> Result<String, NetError> {
        self.push(name, LayerKind::Relu, &[input])
    }

    pub fn max_pool(&mut self, name: &str, input: &str, window: usize, stride: usize, padding: Padding) -> Result<String, NetError> {
        self.push(name, LayerKind::MaxPool { window, stride, padding }, &[input])
    }

    pub fn global_avg_pool(&mut self, name: &str, input: &str) -> Result<String, NetError> {
        self.push(name, LayerKind::GlobalAvgPool, &[input])
    }

    pub fn flatten(&mut self, name: &str, input: &str) -> Result<String, NetError> {
        self.push(name, LayerKind::Flatten, &[input])
    }

    pub fn dense(&mut self, name: &str, input: &str, units: usize) -> Result<String, NetError> {
        self.push(name, LayerKind::Dense { units }, &[input])
    }

    pub fn add(&mut self, name: &str, a: &str, b: &str) -> Result<String, NetError> {
        self.push(name, LayerKind::Add, &[a, b])
    }

    pub fn concat(&mut self, name: &str, inputs: &[&str]) -> Result<String, NetError> {
        self.push(name, LayerKind::Concat, inputs)
    }

    /// conv → batch norm → ReLU, named `{prefix}.conv|bn|relu`.
    pub fn conv_bn_relu(&mut self, prefix: &str, input: &str, out_channels: usize, kernel: usize, stride: usize) -> Result<String, NetError> {
        let c = self.conv(&format!("{prefix}.conv"), input, out_channels, kernel, stride)?;
        let b = self.batch_norm(&format!("{prefix}.bn"), &c)?;
        self.relu(&format!("{prefix}.relu"), &b)
    }

    pub fn set_groups(&mut self, groups: FreezeGroups) {
        self.groups = groups;
    }

    /// Finishes a classifier whose logits are produced by `output`.
    pub fn finish_classifier(
        self,
        output: &str,
        penultimate: &str,
        num_classes: usize,
        aux_heads: Vec<AuxHead>,
    ) -> Result<ModelSpec, NetError> {
        let spec = ModelSpec {
            name: self.name,
            input_shape: self.input_shape,
            num_classes: Some(num_classes),
            layers: self.layers,
            output: output.to_string(),
            penultimate: Some(penultimate.to_string()),
            aux_heads,
            groups: self.groups,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Finishes a headless graph (a block under test) ending at `output`.
    pub fn finish_fragment(self, output: &str) -> Result<ModelSpec, NetError> {
        let spec = ModelSpec {
            name: self.name,
            input_shape: self.input_shape,
            num_classes: None,
            layers: self.layers,
            output: output.to_string(),
            penultimate: None,
            aux_heads: Vec::new(),
            groups: self.groups,
        };
        spec.validate()?;
        Ok(spec)
    }
}
