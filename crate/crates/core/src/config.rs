//! Run configuration: one JSON document, every field optional, unknown keys
//! rejected.
//!
//! ```json
//! {
//!   "dataset": { "kind": "synthetic", "n": 1000, "k": 5, "view_dims": [20, 30, 40] },
//!   "normalization": "minmax",
//!   "model": { "hidden": [128], "embedding_dim": 32, "contrastive_dim": 16 },
//!   "train": { "pretrain_epochs": 200, "cluster_epochs": 300, "seed": 0 },
//!   "precision": "f64",
//!   "out_dir": "runs/default"
//! }
//! ```
//!
//! A manifest dataset is `{ "kind": "manifest", "path": "data/manifest.json" }`;
//! relative paths are resolved against the working directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{generate_synthetic, load_dataset, normalize, MultiViewDataset, Normalization, SyntheticSpec};
use crate::error::{BdclError, Result};
use crate::model::ViewSpec;
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSource {
    Manifest { path: PathBuf },
    Synthetic(SyntheticSpec),
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic(SyntheticSpec::default())
    }
}

impl DatasetSource {
    /// Loads or generates the raw (unnormalized) data.
    pub fn load(&self) -> Result<MultiViewDataset> {
        match self {
            DatasetSource::Manifest { path } => load_dataset(path),
            DatasetSource::Synthetic(spec) => generate_synthetic(spec),
        }
    }
}

/// Shared layer widths; every view gets the same hidden stack and embedding
/// size, with its own input width.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub embedding_dim: usize,
    pub contrastive_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128],
            embedding_dim: 32,
            contrastive_dim: 16,
        }
    }
}

impl ModelConfig {
    pub fn view_specs(&self, dims: &[usize]) -> Vec<ViewSpec> {
        dims.iter()
            .map(|&d| ViewSpec::new(d, self.hidden.clone(), self.embedding_dim))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    /// Applied to the loaded views before training and evaluation.
    pub normalization: Normalization,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub precision: Precision,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::default(),
            normalization: Normalization::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            precision: Precision::default(),
            out_dir: PathBuf::from("runs/default"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| BdclError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| BdclError::io(path, e))?;
        Self::from_json(&text).map_err(|e| BdclError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        let m = &self.model;
        if m.contrastive_dim == 0 || m.contrastive_dim >= m.embedding_dim {
            return Err(BdclError::Config(format!(
                "contrastive_dim must be in [1, embedding_dim), got {} with embedding_dim {}",
                m.contrastive_dim, m.embedding_dim
            )));
        }
        if m.hidden.contains(&0) {
            return Err(BdclError::Config("hidden widths must be positive".into()));
        }
        Ok(())
    }

    /// Fully expanded JSON, suitable for reproducing the run.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// SHA-256 of the compact JSON form with `out_dir` cleared, so the same
    /// run written to different places hashes the same.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&c)?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }

    /// Loads the dataset and applies the configured normalization.
    pub fn load_dataset(&self) -> Result<MultiViewDataset> {
        Ok(normalize(&self.dataset.load()?, self.normalization))
    }
}
