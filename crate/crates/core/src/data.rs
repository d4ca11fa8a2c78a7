//! Multi-view datasets: in-memory form, CSV + JSON manifest on disk,
//! synthetic generation and per-feature normalization.

use std::fs;
use std::path::{Path, PathBuf};

use diffcore::Matrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{BdclError, Result};
use crate::rng::{self, normal_matrix, STREAM_DATA};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    None,
    #[default]
    Minmax,
    Zscore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    pub name: String,
    /// One `N×d_v` matrix per view; row `i` is the same object in every view.
    pub views: Vec<Matrix<f64>>,
    pub labels: Option<Vec<usize>>,
    pub k: usize,
    /// Normalization already applied to `views`.
    pub normalization: Normalization,
    /// Generator seed, for synthetic data.
    pub seed: Option<u64>,
}

impl MultiViewDataset {
    /// Checks view alignment and label coverage.
    pub fn new(name: impl Into<String>, views: Vec<Matrix<f64>>, labels: Option<Vec<usize>>, k: usize) -> Result<Self> {
        let ds = Self {
            name: name.into(),
            views,
            labels,
            k,
            normalization: Normalization::None,
            seed: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.views.is_empty() {
            return Err(BdclError::Dataset("no views".into()));
        }
        if let Some(v) = self.views.iter().position(|x| x.rows() != n) {
            return Err(BdclError::Dataset(format!(
                "view {v} has {} rows, view 0 has {n}",
                self.views[v].rows()
            )));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(BdclError::Dataset(format!("{} labels for {n} samples", labels.len())));
            }
            let mut seen = vec![false; self.k];
            for (row, &l) in labels.iter().enumerate() {
                if l >= self.k {
                    return Err(BdclError::LabelRange {
                        label: l as i64,
                        row,
                        k: self.k,
                    });
                }
                seen[l] = true;
            }
            if let Some(c) = seen.iter().position(|s| !s) {
                return Err(BdclError::Dataset(format!("class {c} has no samples")));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.views.first().map_or(0, Matrix::rows)
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.views.iter().map(Matrix::cols).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub n: usize,
    pub k: usize,
    pub view_dims: Vec<usize>,
    pub latent_dim: usize,
    /// Standard deviation of the cluster centers around the origin, in
    /// units of the within-cluster spread.
    pub cluster_sep: f64,
    /// Standard deviation of the per-view isotropic noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 1000,
            k: 5,
            view_dims: vec![20, 30, 40],
            latent_dim: 8,
            cluster_sep: 2.0,
            noise: 1.5,
            seed: 0,
        }
    }
}

/// Draws `K` centers in a latent space, samples unit-variance Gaussian
/// points around them with balanced labels, and maps the latent points into
/// each view through an independent random linear map plus noise.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<MultiViewDataset> {
    let SyntheticSpec {
        n,
        k,
        latent_dim,
        cluster_sep,
        noise,
        seed,
        ..
    } = *spec;
    if k < 2 {
        return Err(BdclError::Config(format!("need K >= 2, got {k}")));
    }
    if n < 2 * k {
        return Err(BdclError::Config(format!("need N >= 2K, got N={n}, K={k}")));
    }
    if spec.view_dims.is_empty() || spec.view_dims.iter().any(|&d| d < 2) || latent_dim < 1 {
        return Err(BdclError::Config("view dims must be >= 2 and latent dim >= 1".into()));
    }
    if !(cluster_sep >= 0.0 && noise >= 0.0) {
        return Err(BdclError::Config("cluster_sep and noise must be >= 0".into()));
    }

    let mut r = rng::rng_for(seed, &[STREAM_DATA]);
    let centers: Matrix<f64> = normal_matrix(k, latent_dim, cluster_sep, &mut r);
    let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    labels.shuffle(&mut r);
    let spread: Matrix<f64> = normal_matrix(n, latent_dim, 1.0, &mut r);
    let latent = Matrix::from_fn(n, latent_dim, |i, j| centers.get(labels[i], j) + spread.get(i, j));

    let mut views = Vec::with_capacity(spec.view_dims.len());
    for &d in &spec.view_dims {
        let map: Matrix<f64> = normal_matrix(latent_dim, d, 1.0 / (latent_dim as f64).sqrt(), &mut r);
        let clean = latent.matmul(&map)?;
        let jitter: Matrix<f64> = normal_matrix(n, d, noise, &mut r);
        views.push(clean.add(&jitter)?);
    }
    let mut ds = MultiViewDataset::new(format!("synthetic-{seed}"), views, Some(labels), k)?;
    ds.seed = Some(seed);
    Ok(ds)
}

/// Rescales every feature column. Constant columns become zero in both modes.
pub fn normalize(ds: &MultiViewDataset, mode: Normalization) -> MultiViewDataset {
    let views = ds
        .views
        .iter()
        .map(|x| match mode {
            Normalization::None => x.clone(),
            Normalization::Minmax => per_column(x, |col| {
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let range = hi - lo;
                if range > 0.0 {
                    col.iter().map(|&v| (v - lo) / range).collect()
                } else {
                    vec![0.0; col.len()]
                }
            }),
            Normalization::Zscore => per_column(x, |col| {
                let n = col.len() as f64;
                let mean = col.iter().sum::<f64>() / n;
                let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                if std > 0.0 {
                    col.iter().map(|&v| (v - mean) / std).collect()
                } else {
                    vec![0.0; col.len()]
                }
            }),
        })
        .collect();
    MultiViewDataset {
        views,
        normalization: if mode == Normalization::None { ds.normalization } else { mode },
        ..ds.clone()
    }
}

fn per_column(x: &Matrix<f64>, f: impl Fn(&[f64]) -> Vec<f64>) -> Matrix<f64> {
    let mut out = x.clone();
    for j in 0..x.cols() {
        for (i, v) in f(&x.column(j)).into_iter().enumerate() {
            out.set(i, j, v);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewFile {
    pub file: String,
    pub dim: usize,
}

/// JSON manifest describing a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    pub n: usize,
    pub k: usize,
    pub views: Vec<ViewFile>,
    pub labels_file: Option<String>,
    pub normalization: Normalization,
    pub seed: Option<u64>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes one headerless CSV per view, an optional labels CSV and the
/// manifest into `dir`. Returns the manifest path.
pub fn save_dataset(ds: &MultiViewDataset, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| BdclError::io(dir, e))?;
    let mut views = Vec::with_capacity(ds.views.len());
    for (v, x) in ds.views.iter().enumerate() {
        let file = format!("view{v}.csv");
        write_matrix_csv(&dir.join(&file), x)?;
        views.push(ViewFile { file, dim: x.cols() });
    }
    let labels_file = match &ds.labels {
        Some(labels) => {
            let file = "labels.csv".to_string();
            let path = dir.join(&file);
            let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&path)?;
            for l in labels {
                w.write_record([l.to_string()])?;
            }
            w.flush().map_err(|e| BdclError::io(&path, e))?;
            Some(file)
        }
        None => None,
    };
    let manifest = DatasetManifest {
        name: ds.name.clone(),
        n: ds.n(),
        k: ds.k,
        views,
        labels_file,
        normalization: ds.normalization,
        seed: ds.seed,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text + "\n").map_err(|e| BdclError::io(&path, e))?;
    Ok(path)
}

/// Writes a headerless CSV with shortest round-trip decimal values.
pub fn write_matrix_csv(path: &Path, x: &Matrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for i in 0..x.rows() {
        w.write_record(x.row(i).iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| BdclError::io(path, e))?;
    Ok(())
}

fn read_matrix_csv(path: &Path, rows: usize, cols: usize) -> Result<Matrix<f64>> {
    if !path.is_file() {
        return Err(BdclError::MissingViewFile(path.to_path_buf()));
    }
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_path(path)?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut found = 0;
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != cols {
            return Err(BdclError::ColumnCount {
                file: path.to_path_buf(),
                expected: cols,
                found: rec.len(),
            });
        }
        for field in rec.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| BdclError::Dataset(format!("{}: row {found}: bad number {field:?}", path.display())))?;
            data.push(v);
        }
        found += 1;
    }
    if found != rows {
        return Err(BdclError::RowCount {
            file: path.to_path_buf(),
            expected: rows,
            found,
        });
    }
    Ok(Matrix::new(rows, cols, data)?)
}

fn read_labels(path: &Path, n: usize, k: usize) -> Result<Vec<usize>> {
    if !path.is_file() {
        return Err(BdclError::MissingViewFile(path.to_path_buf()));
    }
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut labels = Vec::with_capacity(n);
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = rec.get(0).unwrap_or("").trim();
        let l: i64 = field
            .parse()
            .map_err(|_| BdclError::Dataset(format!("{}: row {row}: bad label {field:?}", path.display())))?;
        if l < 0 || l as usize >= k {
            return Err(BdclError::LabelRange { label: l, row, k });
        }
        labels.push(l as usize);
    }
    if labels.len() != n {
        return Err(BdclError::RowCount {
            file: path.to_path_buf(),
            expected: n,
            found: labels.len(),
        });
    }
    Ok(labels)
}

/// Reads a dataset described by a manifest. File names are resolved
/// relative to the manifest's directory.
pub fn load_dataset(manifest_path: &Path) -> Result<MultiViewDataset> {
    let text = fs::read_to_string(manifest_path).map_err(|e| BdclError::io(manifest_path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let views = manifest
        .views
        .iter()
        .map(|vf| read_matrix_csv(&base.join(&vf.file), manifest.n, vf.dim))
        .collect::<Result<Vec<_>>>()?;
    let labels = manifest
        .labels_file
        .as_ref()
        .map(|f| read_labels(&base.join(f), manifest.n, manifest.k))
        .transpose()?;
    let mut ds = MultiViewDataset::new(manifest.name, views, labels, manifest.k)?;
    ds.normalization = manifest.normalization;
    ds.seed = manifest.seed;
    Ok(ds)
}
