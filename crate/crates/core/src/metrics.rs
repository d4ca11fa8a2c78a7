//! External clustering metrics and the coupling diagnostic.
//!
//! | metric | definition |
//! |--------|------------|
//! | ACC | matched fraction under the best one-to-one cluster→class map |
//! | NMI | `I(pred; truth) / sqrt(H(pred)·H(truth))`, natural log |
//! | PUR | fraction of samples in the majority class of their cluster |
//!
//! Labels are arbitrary ids; only the partition they induce matters.

use std::collections::BTreeMap;

use diffcore::{Matrix, Real, NORM_EPS};
use serde::{Deserialize, Serialize};

use crate::data::MultiViewDataset;
use crate::error::{BdclError, Result};
use crate::losses::LossBreakdown;
use crate::model::{forward_views, ModelState};

/// Maximum-weight perfect matching on a square count matrix
/// (Kuhn–Munkres with potentials, O(n³)). Returns `map[row] = column`.
pub fn hungarian_match(confusion: &[Vec<u64>]) -> Result<Vec<usize>> {
    let n = confusion.len();
    if confusion.iter().any(|r| r.len() != n) {
        return Err(BdclError::Metric("hungarian_match needs a square matrix".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let max = confusion.iter().flatten().copied().max().unwrap_or(0) as i64;
    let cost = |i: usize, j: usize| max - confusion[i][j] as i64;

    // 1-based arrays; column 0 is a virtual start.
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut map = vec![0; n];
    for j in 1..=n {
        map[owner[j] - 1] = j - 1;
    }
    Ok(map)
}

/// Relabels ids to `0..count` in order of first appearance.
fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    let out = labels
        .iter()
        .map(|&l| {
            let next = ids.len();
            *ids.entry(l).or_insert(next)
        })
        .collect();
    (out, ids.len())
}

/// Contingency table `counts[cluster][class]` over compacted ids.
struct Contingency {
    counts: Vec<Vec<u64>>,
    n: usize,
}

impl Contingency {
    fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(BdclError::Metric(format!("{} predictions vs {} labels", pred.len(), truth.len())));
        }
        if pred.is_empty() {
            return Err(BdclError::Metric("no samples".into()));
        }
        let (p, kp) = compact(pred);
        let (t, kt) = compact(truth);
        let mut counts = vec![vec![0u64; kt]; kp];
        for (&a, &b) in p.iter().zip(&t) {
            counts[a][b] += 1;
        }
        Ok(Self { counts, n: pred.len() })
    }

    fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    fn col_sums(&self) -> Vec<u64> {
        let mut out = vec![0; self.counts[0].len()];
        for r in &self.counts {
            for (o, &c) in out.iter_mut().zip(r) {
                *o += c;
            }
        }
        out
    }
}

/// Accuracy under the optimal bijection, plus the map from predicted
/// cluster id (compacted, in order of first appearance) to class id
/// (compacted likewise). Missing ids on either side are padded.
pub fn clustering_accuracy_with_map(pred: &[usize], truth: &[usize]) -> Result<(f64, Vec<usize>)> {
    let c = Contingency::new(pred, truth)?;
    let size = c.counts.len().max(c.counts[0].len());
    let mut square = vec![vec![0u64; size]; size];
    for (i, r) in c.counts.iter().enumerate() {
        square[i][..r.len()].copy_from_slice(r);
    }
    let map = hungarian_match(&square)?;
    let matched: u64 = map.iter().enumerate().map(|(i, &j)| square[i][j]).sum();
    Ok((matched as f64 / c.n as f64, map))
}

pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    clustering_accuracy_with_map(pred, truth).map(|(acc, _)| acc)
}

fn entropy(counts: &[u64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information with the geometric-mean normalization.
/// Identical partitions (including two single-cluster partitions) score 1;
/// otherwise a zero-entropy side scores 0.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let c = Contingency::new(pred, truth)?;
    let identical = c.counts.len() == c.counts[0].len()
        && c.counts.iter().all(|r| r.iter().filter(|&&x| x > 0).count() == 1)
        && c.col_sums().len() == c.counts.len();
    if identical {
        return Ok(1.0);
    }
    let n = c.n as f64;
    let (rows, cols) = (c.row_sums(), c.col_sums());
    let (hp, ht) = (entropy(&rows, n), entropy(&cols, n));
    if hp == 0.0 || ht == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, r) in c.counts.iter().enumerate() {
        for (j, &nij) in r.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                mi += nij / n * (n * nij / (rows[i] as f64 * cols[j] as f64)).ln();
            }
        }
    }
    Ok((mi / (hp * ht).sqrt()).clamp(0.0, 1.0))
}

pub fn purity(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let c = Contingency::new(pred, truth)?;
    let majority: u64 = c.counts.iter().map(|r| r.iter().copied().max().unwrap_or(0)).sum();
    Ok(majority as f64 / c.n as f64)
}

/// Mean absolute value of the off-diagonal entries of a square matrix.
pub fn offdiag_mean_abs(m: &Matrix<f64>) -> f64 {
    let n = m.rows();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += m.get(i, j).abs();
            }
        }
    }
    total / (n * (n - 1)) as f64
}

/// Column-normalized Gram matrices of one view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub view: usize,
    /// `Z̄ᵀZ̄`, `m×m`.
    pub z: Vec<Vec<f64>>,
    /// `P̄ᵀP̄`, `K×K`.
    pub p: Vec<Vec<f64>>,
    pub z_offdiag_mean: f64,
    pub p_offdiag_mean: f64,
}

/// `X̄ᵀX̄` with unit-norm columns.
pub fn normalized_gram(x: &Matrix<f64>) -> Matrix<f64> {
    let xn = x.l2_normalize_cols(NORM_EPS);
    xn.matmul_tn(&xn).expect("gram of a single matrix")
}

/// Coupling of the embeddings and assignments of every view over the full
/// dataset (no neighbor noise).
pub fn coupling_matrices<T: Real>(model: &ModelState<T>, views: &[Matrix<T>]) -> Result<Vec<Coupling>> {
    let bundle = forward_views(model, views, 0.0, 0)?;
    Ok(bundle
        .views
        .iter()
        .enumerate()
        .map(|(v, f)| {
            let z = normalized_gram(&f.z.cast());
            let p = normalized_gram(&f.p.cast());
            Coupling {
                view: v,
                z_offdiag_mean: offdiag_mean_abs(&z),
                p_offdiag_mean: offdiag_mean_abs(&p),
                z: z.to_rows(),
                p: p.to_rows(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: String,
    pub n: usize,
    pub k: usize,
    pub acc: Option<f64>,
    pub nmi: Option<f64>,
    pub pur: Option<f64>,
    /// Predicted cluster id → class id, when labels are available.
    pub matching: Option<BTreeMap<usize, usize>>,
    pub cluster_sizes: Vec<usize>,
    /// All loss terms on the full dataset.
    pub losses: LossBreakdown,
    pub coupling: Vec<Coupling>,
}

/// Scores predicted labels against the dataset's ground truth, if any.
pub fn score(pred: &[usize], ds: &MultiViewDataset) -> Result<(Option<f64>, Option<f64>, Option<f64>, Option<BTreeMap<usize, usize>>)> {
    let Some(truth) = &ds.labels else {
        return Ok((None, None, None, None));
    };
    let (acc, map) = clustering_accuracy_with_map(pred, truth)?;
    // translate compacted ids back to the original ids
    let mut pred_ids: Vec<usize> = Vec::new();
    for &p in pred {
        if !pred_ids.contains(&p) {
            pred_ids.push(p);
        }
    }
    let mut class_ids: Vec<usize> = Vec::new();
    for &t in truth {
        if !class_ids.contains(&t) {
            class_ids.push(t);
        }
    }
    let matching = pred_ids
        .iter()
        .enumerate()
        .filter_map(|(i, &p)| class_ids.get(map[i]).map(|&c| (p, c)))
        .collect();
    Ok((Some(acc), Some(nmi(pred, truth)?), Some(purity(pred, truth)?), Some(matching)))
}
