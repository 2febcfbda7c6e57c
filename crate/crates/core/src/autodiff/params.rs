use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::write_atomic;

use super::tape::{Gradients, Tape, Var};
use super::tensor::Tensor;

const MAGIC: &[u8; 5] = b"ARLW1";

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub trainable: bool,
}

/// Named tensors with per-tensor trainable flags, ordered by name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Params {
    map: BTreeMap<String, Param>,
}

/// Gradients keyed by parameter name; only trainable parameters appear.
pub type ParamGrads = BTreeMap<String, Tensor>;

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    rows: usize,
    cols: usize,
    trainable: bool,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    tensors: Vec<ManifestEntry>,
}

impl Params {
    pub fn new() -> Params {
        Params::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor, trainable: bool) {
        self.map.insert(name.into(), Param { value, trainable });
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.map.get(name)
    }

    pub fn tensor(&self, name: &str) -> &Tensor {
        &self.map.get(name).unwrap_or_else(|| panic!("no parameter named {name}")).value
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn set_trainable(&mut self, trainable: bool) {
        self.map.values_mut().for_each(|p| p.trainable = trainable);
    }

    /// Adds every parameter of `other` under `prefix`.
    pub fn extend_prefixed(&mut self, prefix: &str, other: &Params) {
        for (name, p) in other.iter() {
            self.map.insert(format!("{prefix}{name}"), p.clone());
        }
    }

    /// The parameters whose names start with `prefix`, with the prefix removed.
    pub fn with_prefix(&self, prefix: &str) -> Params {
        let map = self.map.iter().filter_map(|(k, v)| k.strip_prefix(prefix).map(|rest| (rest.to_string(), v.clone()))).collect();
        Params { map }
    }

    /// Records every parameter as a tape leaf.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        let vars = self.map.iter().map(|(name, p)| (name.clone(), tape.leaf(p.value.clone(), p.trainable))).collect();
        Bound { vars }
    }

    pub fn mut_value(&mut self, name: &str) -> Option<&mut Tensor> {
        self.map.get_mut(name).map(|p| &mut p.value)
    }

    /// Binary form: magic, u32 manifest length, JSON manifest, little-endian values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let manifest = Manifest {
            tensors: self
                .map
                .iter()
                .map(|(name, p)| ManifestEntry { name: name.clone(), rows: p.value.rows, cols: p.value.cols, trainable: p.trainable })
                .collect(),
        };
        let json = serde_json::to_vec(&manifest).expect("manifest serializes");
        let mut out = Vec::with_capacity(MAGIC.len() + 4 + json.len() + 8 * self.map.values().map(|p| p.value.len()).sum::<usize>());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for p in self.map.values() {
            for v in &p.value.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Params> {
        let bad = |msg: &str| Error::Data(format!("parameter file: {msg}"));
        let rest = bytes.strip_prefix(MAGIC.as_slice()).ok_or_else(|| bad("missing ARLW1 header"))?;
        let (len, rest) = rest.split_first_chunk::<4>().ok_or_else(|| bad("truncated header"))?;
        let len = u32::from_le_bytes(*len) as usize;
        if rest.len() < len {
            return Err(bad("truncated manifest"));
        }
        let (json, mut blob) = rest.split_at(len);
        let manifest: Manifest = serde_json::from_slice(json).map_err(|e| bad(&e.to_string()))?;
        let mut params = Params::new();
        for entry in manifest.tensors {
            let n = entry.rows * entry.cols;
            if blob.len() < 8 * n {
                return Err(bad("truncated values"));
            }
            let (values, tail) = blob.split_at(8 * n);
            blob = tail;
            let data = values.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            params.insert(entry.name, Tensor { rows: entry.rows, cols: entry.cols, data }, entry.trainable);
        }
        if !blob.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Params> {
        Params::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }

    /// SHA-256 over names, shapes and values, hex encoded. Trainable flags
    /// are left out so freezing a set does not change its hash.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (name, p) in &self.map {
            h.update((name.len() as u64).to_le_bytes());
            h.update(name.as_bytes());
            h.update((p.value.rows as u64).to_le_bytes());
            h.update((p.value.cols as u64).to_le_bytes());
            for v in &p.value.data {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Tape handles of bound parameters.
#[derive(Debug, Clone)]
pub struct Bound {
    vars: BTreeMap<String, Var>,
}

impl Bound {
    pub fn var(&self, name: &str) -> Var {
        *self.vars.get(name).unwrap_or_else(|| panic!("parameter {name} is not bound"))
    }

    /// Gradients of the trainable parameters (zero where the loss does not depend on them).
    pub fn grads(&self, params: &Params, g: &Gradients) -> ParamGrads {
        params
            .iter()
            .filter(|(_, p)| p.trainable)
            .map(|(name, p)| {
                let grad = g.get(self.var(name)).cloned().unwrap_or_else(|| Tensor::zeros(p.value.rows, p.value.cols));
                (name.to_string(), grad)
            })
            .collect()
    }
}
