//! Lloyd's k-means with k-means++ seeding and restarts. Used as the raw
//! feature baseline.

use diffcore::Matrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{BdclError, Result};
use crate::rng::{self, STREAM_KMEANS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeans {
    pub k: usize,
    pub n_init: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl KMeans {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            n_init: 10,
            max_iter: 300,
            tol: 1e-8,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub labels: Vec<usize>,
    pub centers: Matrix<f64>,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centers: &Matrix<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centers.rows() {
        let d = sq_dist(x, centers.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus(x: &Matrix<f64>, k: usize, r: &mut ChaCha8Rng) -> Matrix<f64> {
    let n = x.rows();
    let mut centers = Matrix::zeros(k, x.cols());
    centers.row_mut(0).copy_from_slice(x.row(r.random_range(0..n)));
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), centers.row(0))).collect();
    for c in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = r.random_range(0.0..total);
            let mut idx = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if target < d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            idx
        } else {
            r.random_range(0..n)
        };
        centers.row_mut(c).copy_from_slice(x.row(pick));
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), centers.row(c)));
        }
    }
    centers
}

fn lloyd(x: &Matrix<f64>, mut centers: Matrix<f64>, max_iter: usize, tol: f64) -> KMeansFit {
    let (n, d, k) = (x.rows(), x.cols(), centers.rows());
    let mut labels = vec![0; n];
    for _ in 0..max_iter {
        for (i, l) in labels.iter_mut().enumerate() {
            *l = nearest(x.row(i), &centers).0;
        }
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, &v) in sums.row_mut(l).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        let mut shift = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                // empty cluster keeps its old center
                continue;
            }
            let new: Vec<f64> = sums.row(c).iter().map(|s| s / counts[c] as f64).collect();
            shift += sq_dist(&new, centers.row(c));
            centers.row_mut(c).copy_from_slice(&new);
        }
        if shift <= tol {
            break;
        }
    }
    let mut inertia = 0.0;
    for (i, l) in labels.iter_mut().enumerate() {
        let (c, dist) = nearest(x.row(i), &centers);
        *l = c;
        inertia += dist;
    }
    KMeansFit {
        labels,
        centers,
        inertia,
    }
}

/// Best of `n_init` seeded runs by inertia.
pub fn kmeans(x: &Matrix<f64>, cfg: &KMeans) -> Result<KMeansFit> {
    if cfg.k < 1 || cfg.k > x.rows() {
        return Err(BdclError::Config(format!("k-means: k={} with {} samples", cfg.k, x.rows())));
    }
    let mut best: Option<KMeansFit> = None;
    for run in 0..cfg.n_init.max(1) {
        let mut r = rng::rng_for(cfg.seed, &[STREAM_KMEANS, run as u64]);
        let fit = lloyd(x, plus_plus(x, cfg.k, &mut r), cfg.max_iter, cfg.tol);
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one run"))
}
