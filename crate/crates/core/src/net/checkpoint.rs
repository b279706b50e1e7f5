//! Binary checkpoint codec.
//!
//! All integers are little-endian.
//!
//! ```text
//! magic       4 bytes  "DCNN"
//! version     u32      1
//! desc_len    u32      byte length of the descriptor
//! descriptor  UTF-8 JSON architecture (ModelSpec)
//! count       u32      number of arrays
//! per array:
//!   name_len  u16, name UTF-8
//!   kind      u8       0 parameter, 1 running mean, 2 running variance
//!   trainable u8       0 or 1 (0 for running statistics)
//!   rank      u8, then rank × u32 dims
//!   len       u32      element count, must equal the product of dims
//!   payload   len × f32
//! ```
//!
//! Running statistics are named `layer.running_mean` and `layer.running_var`.
//! Nothing may follow the last array.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use super::params::{Param, ParamStore};
use super::spec::ModelSpec;
use super::NetError;
use crate::ops::norm::RunningStats;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"DCNN";
pub const CHECKPOINT_VERSION: u32 = 1;

const KIND_PARAM: u8 = 0;
const KIND_MEAN: u8 = 1;
const KIND_VAR: u8 = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckpointError {
    #[error("bad magic: not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint version {0} (expected {CHECKPOINT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("truncated checkpoint while reading {0}")]
    Truncated(String),
    #[error("array `{name}` declares dims {dims:?} but carries {len} values")]
    DimsMismatch { name: String, dims: Vec<usize>, len: usize },
    #[error("architecture descriptor: {0}")]
    Descriptor(String),
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("checkpoint does not fit its architecture: {0}")]
    Params(#[from] NetError),
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("checkpoint field exceeds u32").to_le_bytes());
}

fn put_array(out: &mut Vec<u8>, name: &str, kind: u8, trainable: bool, dims: &[usize], values: &[f32]) {
    let name_len = u16::try_from(name.len()).expect("array name exceeds u16 length");
    out.extend_from_slice(&name_len.to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(kind);
    out.push(trainable as u8);
    out.push(u8::try_from(dims.len()).expect("rank exceeds u8"));
    for &d in dims {
        put_u32(out, d);
    }
    put_u32(out, values.len());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serializes the architecture and every array, parameters first (name
/// order), then running statistics (layer order by name).
pub fn encode_checkpoint(spec: &ModelSpec, params: &ParamStore<f32>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let desc = spec.to_json();
    put_u32(&mut out, desc.len());
    out.extend_from_slice(desc.as_bytes());
    put_u32(&mut out, params.params.len() + 2 * params.running.len());
    for (name, p) in &params.params {
        put_array(&mut out, name, KIND_PARAM, p.trainable, p.value.shape(), p.value.data());
    }
    for (layer, rs) in &params.running {
        let c = rs.mean.len();
        put_array(&mut out, &format!("{layer}.running_mean"), KIND_MEAN, false, &[c], &rs.mean);
        put_array(&mut out, &format!("{layer}.running_var"), KIND_VAR, false, &[c], &rs.var);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| CheckpointError::Truncated(what.to_string()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, CheckpointError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn str(&mut self, n: usize, what: &str) -> Result<&'a str, CheckpointError> {
        core::str::from_utf8(self.take(n, what)?).map_err(|_| CheckpointError::Malformed(format!("{what} is not UTF-8")))
    }
}

/// Parses a checkpoint and checks the arrays against the architecture.
/// Nothing is returned unless the whole file is valid.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ModelSpec, ParamStore<f32>), CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if bytes.len() < 4 || bytes[..4] != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    r.pos = 4;
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let desc_len = r.u32("descriptor length")? as usize;
    let desc = r.str(desc_len, "descriptor")?;
    let spec: ModelSpec = serde_json::from_str(desc).map_err(|e| CheckpointError::Descriptor(e.to_string()))?;
    spec.validate().map_err(|e| CheckpointError::Descriptor(e.to_string()))?;

    let count = r.u32("array count")? as usize;
    let mut params = BTreeMap::new();
    let mut means: BTreeMap<String, Vec<f32>> = BTreeMap::new();
    let mut vars: BTreeMap<String, Vec<f32>> = BTreeMap::new();
    for _ in 0..count {
        let name_len = r.u16("array name length")? as usize;
        let name = r.str(name_len, "array name")?.to_string();
        let kind = r.u8("array kind")?;
        let trainable = match r.u8("trainable flag")? {
            0 => false,
            1 => true,
            other => return Err(CheckpointError::Malformed(format!("`{name}` has trainable flag {other}"))),
        };
        let rank = r.u8("rank")? as usize;
        let dims: Vec<usize> = (0..rank).map(|_| r.u32("dims").map(|d| d as usize)).collect::<Result<_, _>>()?;
        let len = r.u32("element count")? as usize;
        if dims.iter().product::<usize>() != len || rank == 0 {
            return Err(CheckpointError::DimsMismatch { name, dims, len });
        }
        let payload = r.take(len.checked_mul(4).ok_or_else(|| CheckpointError::Truncated(name.clone()))?, "payload")?;
        let values: Vec<f32> = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        let duplicate = match kind {
            KIND_PARAM => {
                let value = Tensor::from_vec(&dims, values).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
                params.insert(name.clone(), Param { value, trainable }).is_some()
            }
            KIND_MEAN | KIND_VAR => {
                let suffix = if kind == KIND_MEAN { ".running_mean" } else { ".running_var" };
                let layer = name
                    .strip_suffix(suffix)
                    .ok_or_else(|| CheckpointError::Malformed(format!("statistic `{name}` lacks suffix {suffix}")))?;
                let map = if kind == KIND_MEAN { &mut means } else { &mut vars };
                map.insert(layer.to_string(), values).is_some()
            }
            other => return Err(CheckpointError::Malformed(format!("`{name}` has unknown kind {other}"))),
        };
        if duplicate {
            return Err(CheckpointError::Malformed(format!("duplicate array `{name}`")));
        }
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::Malformed(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let mut running = BTreeMap::new();
    for (layer, mean) in means {
        let var = vars.remove(&layer).ok_or_else(|| CheckpointError::Malformed(format!("`{layer}` has a mean but no variance")))?;
        running.insert(layer, RunningStats { mean, var });
    }
    if let Some(layer) = vars.keys().next() {
        return Err(CheckpointError::Malformed(format!("`{layer}` has a variance but no mean")));
    }
    let store = ParamStore { params, running };
    store.validate(&spec)?;
    Ok((spec, store))
}
