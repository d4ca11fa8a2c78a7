//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"BDCLCKPT"  u32 version  u64 meta_len  meta (JSON)
//! u64 count    count × f64 parameter values
//! 32-byte SHA-256 of everything above
//! ```
//!
//! Parameters are written in [`ModelState::params`] order with
//! [`ParamScope::All`], always as f64 so single precision models round-trip
//! exactly.

use std::fs;
use std::path::Path;

use diffcore::{Matrix, Real};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BdclError, Result};
use crate::model::{init_model, ModelState, ParamScope, ViewSpec};
use crate::trainer::TrainConfig;

pub const MAGIC: &[u8; 8] = b"BDCLCKPT";
pub const VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    precision: String,
    specs: Vec<ViewSpec>,
    contrastive_dim: usize,
    clusters: usize,
    shapes: Vec<(usize, usize)>,
    train: TrainConfig,
    config_hash: String,
}

/// A loaded checkpoint. Weights are held in f64; use [`Checkpoint::model`]
/// to get them at the stored or any other precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub weights: ModelState<f64>,
    pub train: TrainConfig,
    pub precision: String,
    pub config_hash: String,
}

impl Checkpoint {
    pub fn model<T: Real>(&self) -> ModelState<T> {
        self.weights.cast()
    }
}

/// Serializes the model and its training config. `config_hash` identifies
/// the full run configuration.
pub fn checkpoint_bytes<T: Real>(model: &ModelState<T>, train: &TrainConfig, config_hash: &str) -> Result<Vec<u8>> {
    let params = model.params(ParamScope::All);
    let meta = Meta {
        precision: T::NAME.to_string(),
        specs: model.specs.clone(),
        contrastive_dim: model.contrastive_dim,
        clusters: model.clusters,
        shapes: params.iter().map(|p| p.shape()).collect(),
        train: train.clone(),
        config_hash: config_hash.to_string(),
    };
    let meta = serde_json::to_vec(&meta)?;
    let count: usize = params.iter().map(|p| p.len()).sum();

    let mut out = Vec::with_capacity(28 + meta.len() + 8 * count + DIGEST_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta);
    out.extend_from_slice(&(count as u64).to_le_bytes());
    for p in &params {
        for v in p.data() {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

pub fn save_checkpoint<T: Real>(model: &ModelState<T>, train: &TrainConfig, config_hash: &str, path: &Path) -> Result<()> {
    let bytes = checkpoint_bytes(model, train, config_hash)?;
    fs::write(path, bytes).map_err(|e| BdclError::io(path, e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| BdclError::CheckpointCorrupted("truncated payload".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(BdclError::CheckpointVersion("missing BDCLCKPT format tag".into()));
    }
    if bytes.len() < MAGIC.len() + 4 {
        return Err(BdclError::CheckpointCorrupted("truncated header".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(BdclError::CheckpointVersion(format!("version {version}, expected {VERSION}")));
    }
    if bytes.len() < 12 + DIGEST_LEN {
        return Err(BdclError::CheckpointCorrupted("truncated file".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(BdclError::CheckpointCorrupted("checksum mismatch".into()));
    }

    let mut r = Reader { buf: body, pos: 12 };
    let meta_len = r.u64()? as usize;
    let meta: Meta = serde_json::from_slice(r.take(meta_len)?)
        .map_err(|e| BdclError::CheckpointCorrupted(format!("metadata: {e}")))?;
    let count = r.u64()? as usize;
    let values = r.take(count.checked_mul(8).unwrap_or(usize::MAX))?;
    if r.pos != body.len() {
        return Err(BdclError::CheckpointCorrupted("trailing bytes".into()));
    }

    let corrupted = |e: BdclError| BdclError::CheckpointCorrupted(e.to_string());
    let mut weights = init_model::<f64>(&meta.specs, meta.contrastive_dim, meta.clusters, 0).map_err(corrupted)?;
    let mut params = weights.params_mut(ParamScope::All);
    let shapes: Vec<(usize, usize)> = params.iter().map(|p| p.shape()).collect();
    if shapes != meta.shapes || shapes.iter().map(|(a, b)| a * b).sum::<usize>() != count {
        return Err(BdclError::CheckpointCorrupted("parameter shapes disagree with dims".into()));
    }
    let mut chunks = values.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    for p in params.iter_mut() {
        let (rows, cols) = p.shape();
        **p = Matrix::new(rows, cols, chunks.by_ref().take(rows * cols).collect())?;
    }
    Ok(Checkpoint {
        weights,
        train: meta.train,
        precision: meta.precision,
        config_hash: meta.config_hash,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(BdclError::CheckpointMissing(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| BdclError::io(path, e))?;
    parse_checkpoint(&bytes)
}
