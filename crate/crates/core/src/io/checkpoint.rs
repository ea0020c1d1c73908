//! `PUXP1` checkpoint format. All integers little-endian.
//!
//! ```text
//! magic        5 bytes  "PUXP1"
//! spec_len     u32
//! spec         spec_len bytes of UTF-8 key=value text (model keys only)
//! param_count  u32
//! per parameter:
//!   name_len   u16
//!   name       name_len bytes UTF-8
//!   rank       u8
//!   dims       rank x u32
//!   values     prod(dims) x f32
//! ```
//!
//! Values are computed in `f64` and stored as `f32`. Trailing bytes are an error.

use std::fs;
use std::path::Path;

use super::config::{model_spec_from_kv, model_spec_to_kv, KvConfig, MODEL_KEYS};
use crate::error::{Error, Result};
use crate::pipeline::{Model, ModelSpec};

pub const MAGIC: &[u8; 5] = b"PUXP1";

#[derive(Clone, Debug, PartialEq)]
pub struct StoredParam {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub spec: ModelSpec,
    pub params: Vec<StoredParam>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(bad(format!("truncated while reading {what} at byte {}", self.pos)));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn string(&mut self, n: usize, what: &str) -> Result<String> {
        String::from_utf8(self.take(n, what)?.to_vec()).map_err(|_| bad(format!("{what} is not UTF-8")))
    }
}

impl Checkpoint {
    pub fn from_model(model: &Model) -> Self {
        Self {
            spec: model.spec().clone(),
            params: model
                .store()
                .iter()
                .map(|(_, p)| StoredParam {
                    name: p.name.clone(),
                    shape: p.tensor.shape().to_vec(),
                    values: p.tensor.data().iter().map(|&v| v as f32).collect(),
                })
                .collect(),
        }
    }

    /// Rebuilds the model from the spec and checks that every stored
    /// parameter matches the layout the spec implies.
    pub fn to_model(&self) -> Result<Model> {
        let mut model = Model::new(self.spec.clone(), 0)?;
        let expected: Vec<_> = model
            .store()
            .iter()
            .map(|(id, p)| (id, p.name.clone(), p.tensor.shape().to_vec()))
            .collect();
        if expected.len() != self.params.len() {
            return Err(bad(format!(
                "spec implies {} parameters, checkpoint has {}",
                expected.len(),
                self.params.len()
            )));
        }
        for ((id, name, shape), stored) in expected.into_iter().zip(&self.params) {
            if name != stored.name {
                return Err(bad(format!("expected parameter `{name}`, found `{}`", stored.name)));
            }
            if shape != stored.shape {
                return Err(bad(format!(
                    "parameter `{name}` has shape {:?}, spec implies {shape:?}",
                    stored.shape
                )));
            }
            let data: Vec<f64> = stored.values.iter().map(|&v| v as f64).collect();
            model.store_mut().set(id, &data)?;
        }
        Ok(model)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut kv = KvConfig::new();
        model_spec_to_kv(&self.spec, &mut kv);
        let spec = kv.to_text();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(spec.len() as u32).to_le_bytes());
        out.extend_from_slice(spec.as_bytes());
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&(p.name.len() as u16).to_le_bytes());
            out.extend_from_slice(p.name.as_bytes());
            out.push(p.shape.len() as u8);
            for &d in &p.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in &p.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        let magic = r.take(MAGIC.len(), "magic").map_err(|_| bad("file too short to be a checkpoint"))?;
        if magic != MAGIC {
            return Err(bad(format!(
                "unsupported checkpoint version: expected magic PUXP1, found {:?}",
                String::from_utf8_lossy(magic)
            )));
        }
        let spec_len = r.u32("spec length")? as usize;
        let spec_text = r.string(spec_len, "spec")?;
        let kv = KvConfig::parse(&spec_text).map_err(|e| bad(format!("spec block: {e}")))?;
        kv.reject_unknown(&[MODEL_KEYS]).map_err(|e| bad(format!("spec block: {e}")))?;
        let spec = model_spec_from_kv(&kv).map_err(|e| bad(format!("spec block: {e}")))?;

        let count = r.u32("parameter count")? as usize;
        let mut params = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let name_len = r.u16("name length")? as usize;
            let name = r.string(name_len, "parameter name")?;
            let rank = r.u8("rank")? as usize;
            let shape = (0..rank)
                .map(|_| r.u32("dimension").map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| bad(format!("parameter `{name}` is too large")))?;
            let bytes = r.take(n.checked_mul(4).ok_or_else(|| bad("size overflow"))?, "values")?;
            let values = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            params.push(StoredParam { name, shape, values });
        }
        if r.pos != buf.len() {
            return Err(bad(format!("{} trailing bytes", buf.len() - r.pos)));
        }
        Ok(Self { spec, params })
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &Model) -> Result<()> {
    fs::write(path, Checkpoint::from_model(model).to_bytes())?;
    Ok(())
}

/// Reads and validates a checkpoint; nothing is returned unless the whole
/// file is consistent with its spec.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    Checkpoint::from_bytes(&fs::read(path)?)?.to_model()
}
