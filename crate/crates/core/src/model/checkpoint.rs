//! Single-file checkpoint.
//!
//! ```text
//! magic "TCCK" | version u32 | meta_len u32 | meta (JSON)
//! count u32 | count * (name: u32 len + utf8 | len u64 | f32 * len)
//! crc32 u32 over every preceding byte
//! ```

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelParams, TargetNormalizer, TreeModel};
use crate::featurizer::FeaturizerConfig;
use crate::nn::ParamSet;

const MAGIC: &[u8; 4] = b"TCCK";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checksum mismatch")]
    Checksum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub normalizer: TargetNormalizer,
    pub featurizer: FeaturizerConfig,
    pub omega: f64,
    /// `hash` or `embed`.
    pub encoder: String,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub model: TreeModel<f32>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let meta = serde_json::to_vec(&self.meta).expect("meta serializes");
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta);
        let named = self.model.params.named();
        out.extend_from_slice(&(named.len() as u32).to_le_bytes());
        for (name, data) in named {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(data.len() as u64).to_le_bytes());
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let corrupt = |m: &str| CheckpointError::Corrupt(m.to_string());
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().unwrap()) {
            return Err(CheckpointError::Checksum);
        }
        let mut r = Reader { buf: body, at: 4 };
        if r.u32()? != VERSION {
            return Err(corrupt("unsupported version"));
        }
        let meta_len = r.u32()? as usize;
        let meta: CheckpointMeta =
            serde_json::from_slice(r.take(meta_len)?).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        let mut params = ModelParams::<f32>::zeros(&meta.model);
        let expected: Vec<(String, usize)> = params.named().into_iter().map(|(n, s)| (n, s.len())).collect();
        let count = r.u32()? as usize;
        if count != expected.len() {
            return Err(corrupt("tensor count does not match the model config"));
        }
        let mut flat = Vec::with_capacity(params.param_count());
        for (name, len) in expected {
            let n = r.u32()? as usize;
            let got = std::str::from_utf8(r.take(n)?).map_err(|_| corrupt("tensor name is not utf-8"))?;
            if got != name || r.u64()? as usize != len {
                return Err(CheckpointError::Corrupt(format!("unexpected tensor `{got}`")));
            }
            for chunk in r.take(len * 4)?.chunks_exact(4) {
                flat.push(f32::from_le_bytes(chunk.try_into().unwrap()));
            }
        }
        if r.at != body.len() {
            return Err(corrupt("trailing bytes"));
        }
        params.load_flat(&flat);
        Ok(Checkpoint {
            model: TreeModel::from_params(meta.model, params),
            meta,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| CheckpointError::Corrupt("truncated".into()))?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
