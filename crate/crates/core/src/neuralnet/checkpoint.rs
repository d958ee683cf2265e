//! Binary checkpoint container.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic            8 bytes  "HRLNAVCK"
//! format_version   u32
//! metadata         u32 length + UTF-8 JSON
//! entry_count      u32
//! entry*           name (u32 length + UTF-8)
//!                  layer_count u32, then per layer: inputs u32, outputs u32, activation u8
//!                  parameters f64* (per layer: weights row-major in x out, then bias)
//!                  has_adam u8; if 1: t u64, lr f64, beta1 f64, beta2 f64, eps f64,
//!                  first moments f64*, second moments f64* (parameter layout)
//! array_count      u32
//! array*           name (u32 length + UTF-8), len u64, f64*
//! checksum         u64 FNV-1a over every preceding byte
//! ```

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use thiserror::Error;

use super::{Activation, AdamConfig, AdamState, Gradients, Layer, NetError, Network};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HRLNAVCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint format_version {0} (this build reads {CHECKPOINT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("checkpoint is truncated: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("checkpoint is corrupt: checksum mismatch")]
    ChecksumMismatch,
    #[error("checkpoint is corrupt: {0}")]
    Malformed(String),
    #[error("checkpoint has no entry named `{0}`")]
    MissingEntry(String),
    #[error("checkpoint entry `{name}` is incompatible: {source}")]
    Network { name: String, source: NetError },
    #[error("checkpoint I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointEntry {
    pub name: String,
    pub network: Network,
    pub adam: Option<AdamState>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    /// Free-form JSON describing what the networks belong to.
    pub metadata: String,
    pub entries: Vec<CheckpointEntry>,
    /// Named flat arrays for non-network state (replay buffers).
    pub arrays: Vec<(String, Vec<f64>)>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn params(&mut self, g: &Gradients) {
        for v in g.iter() {
            self.f64(v);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.buf.len() - self.pos < n {
            return Err(CheckpointError::Truncated { offset: self.pos, needed: n - (self.buf.len() - self.pos) });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String, CheckpointError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| CheckpointError::Malformed("invalid UTF-8 string".into()))
    }
    fn fill(&mut self, g: &mut Gradients) -> Result<(), CheckpointError> {
        for (w, b) in g.weights.iter_mut().zip(g.biases.iter_mut()) {
            for v in w.iter_mut() {
                *v = self.f64()?;
            }
            for v in b.iter_mut() {
                *v = self.f64()?;
            }
        }
        Ok(())
    }
}

fn params_of(net: &Network) -> Gradients {
    Gradients {
        weights: net.layers().iter().map(|l| l.weights.clone()).collect(),
        biases: net.layers().iter().map(|l| l.bias.clone()).collect(),
    }
}

impl Checkpoint {
    pub fn new(metadata: impl Into<String>) -> Self {
        Self { metadata: metadata.into(), entries: Vec::new(), arrays: Vec::new() }
    }

    pub fn push(&mut self, name: &str, network: &Network, adam: Option<&AdamState>) {
        self.entries.push(CheckpointEntry { name: name.to_string(), network: network.clone(), adam: adam.cloned() });
    }

    pub fn get(&self, name: &str) -> Result<&CheckpointEntry, CheckpointError> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| CheckpointError::MissingEntry(name.to_string()))
    }

    pub fn push_array(&mut self, name: &str, data: Vec<f64>) {
        self.arrays.push((name.to_string(), data));
    }

    pub fn array(&self, name: &str) -> Option<&[f64]> {
        self.arrays.iter().find(|(n, _)| n == name).map(|(_, d)| d.as_slice())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.str(&self.metadata);
        w.u32(self.entries.len() as u32);
        for e in &self.entries {
            w.str(&e.name);
            let layers = e.network.layers();
            w.u32(layers.len() as u32);
            for l in layers {
                w.u32(l.inputs() as u32);
                w.u32(l.outputs() as u32);
                w.u8(l.activation.code());
            }
            w.params(&params_of(&e.network));
            match &e.adam {
                None => w.u8(0),
                Some(a) => {
                    w.u8(1);
                    w.u64(a.t);
                    w.f64(a.config.lr);
                    w.f64(a.config.beta1);
                    w.f64(a.config.beta2);
                    w.f64(a.config.eps);
                    w.params(&a.m);
                    w.params(&a.v);
                }
            }
        }
        w.u32(self.arrays.len() as u32);
        for (name, data) in &self.arrays {
            w.str(name);
            w.u64(data.len() as u64);
            for &v in data {
                w.f64(v);
            }
        }
        let sum = fnv1a(&w.0);
        w.u64(sum);
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < CHECKPOINT_MAGIC.len() || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let mut r = Reader { buf: bytes, pos: 8 };
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::UnsupportedVersion(version));
        }
        let metadata = r.str()?;
        let count = r.u32()? as usize;
        let mut entries = Vec::with_capacity(count.min(64));
        for _ in 0..count {
            let name = r.str()?;
            let n_layers = r.u32()? as usize;
            if n_layers == 0 || n_layers > 1024 {
                return Err(CheckpointError::Malformed(format!("entry `{name}` declares {n_layers} layers")));
            }
            let mut shapes = Vec::with_capacity(n_layers);
            for _ in 0..n_layers {
                let (i, o) = (r.u32()? as usize, r.u32()? as usize);
                let act = Activation::from_code(r.u8()?)
                    .ok_or_else(|| CheckpointError::Malformed("unknown activation code".into()))?;
                if i == 0 || o == 0 || i.saturating_mul(o) > 1 << 26 {
                    return Err(CheckpointError::Malformed(format!("layer shape {i}x{o}")));
                }
                shapes.push((i, o, act));
            }
            let layers = shapes
                .iter()
                .map(|&(i, o, activation)| Layer { weights: Array2::zeros((i, o)), bias: Array1::zeros(o), activation })
                .collect();
            let mut network = Network::from_layers(layers)
                .map_err(|source| CheckpointError::Network { name: name.clone(), source })?;
            let mut params = Gradients::zeros_like(&network);
            r.fill(&mut params)?;
            for (l, (w, b)) in network.layers_mut().iter_mut().zip(params.weights.into_iter().zip(params.biases)) {
                l.weights = w;
                l.bias = b;
            }
            let adam = match r.u8()? {
                0 => None,
                1 => {
                    let t = r.u64()?;
                    let config = AdamConfig { lr: r.f64()?, beta1: r.f64()?, beta2: r.f64()?, eps: r.f64()? };
                    let mut state = AdamState::new(&network, config);
                    state.t = t;
                    r.fill(&mut state.m)?;
                    r.fill(&mut state.v)?;
                    Some(state)
                }
                other => return Err(CheckpointError::Malformed(format!("adam flag {other}"))),
            };
            entries.push(CheckpointEntry { name, network, adam });
        }
        let n_arrays = r.u32()? as usize;
        let mut arrays = Vec::with_capacity(n_arrays.min(64));
        for _ in 0..n_arrays {
            let name = r.str()?;
            let len = r.u64()? as usize;
            if len > (r.buf.len() - r.pos) / 8 {
                return Err(CheckpointError::Truncated { offset: r.pos, needed: len.saturating_mul(8) - (r.buf.len() - r.pos) });
            }
            let data = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
            arrays.push((name, data));
        }
        let body_end = r.pos;
        let stored = r.u64()?;
        if r.pos != bytes.len() {
            return Err(CheckpointError::Malformed(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        if fnv1a(&bytes[..body_end]) != stored {
            return Err(CheckpointError::ChecksumMismatch);
        }
        Ok(Self { metadata, entries, arrays })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&fs::read(path)?)
    }
}
