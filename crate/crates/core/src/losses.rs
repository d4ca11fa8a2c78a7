//! Training objectives.
//!
//! Every loss is built on a [`Graph`] so it can be differentiated; the
//! [`values`] submodule wraps each one for plain matrices. `N` in the
//! per-sample normalizations is the number of rows actually passed in,
//! which during training is the minibatch size.
//!
//! | term | meaning |
//! |------|---------|
//! | `l_ir` | reconstruction error |
//! | `l_ic` | cross-view instance contrast over cosine similarities |
//! | `l_cc` | agreement of assignments across views and with noisy neighbors |
//! | `l_p`  | negative entropy of the mean assignment (anti-collapse) |
//! | `l_fd` | off-identity mass of the column-normalized embedding Gram matrix |
//! | `l_cd` | same, on the assignment matrix |

use diffcore::{DiffError, Graph, Matrix, Real, Var, NORM_EPS};
use serde::{Deserialize, Serialize};

use crate::error::{BdclError, Result};
use crate::model::ViewVars;
use crate::rng::{self, normal_matrix, STREAM_NOISE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub tau: f64,
    pub sigma: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            tau: 0.5,
            sigma: 0.001,
            lambda1: 1.0,
            lambda2: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(BdclError::Config(format!("tau must be > 0, got {}", self.tau)));
        }
        for (name, v) in [("sigma", self.sigma), ("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(BdclError::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Switches that drop single terms from the optimized total. Disabled
/// terms are still computed and reported.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ablation {
    pub no_cc: bool,
    pub no_fd: bool,
    pub no_cd: bool,
}

impl Ablation {
    pub fn without_bd() -> Self {
        Self {
            no_fd: true,
            no_cd: true,
            ..Self::default()
        }
    }

    fn mask(off: bool) -> f64 {
        if off {
            0.0
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_ir: f64,
    pub l_ic: f64,
    pub l_cc: f64,
    pub l_p: f64,
    pub l_fd: f64,
    pub l_cd: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// `l_ir + l_ic + λ1(l_cc + l_p) + λ2(l_fd + l_cd)` with ablated terms dropped.
    pub fn combine(&self, w: &LossWeights, ablation: &Ablation) -> f64 {
        let cc = Ablation::mask(ablation.no_cc) * self.l_cc;
        let fd = Ablation::mask(ablation.no_fd) * self.l_fd;
        let cd = Ablation::mask(ablation.no_cd) * self.l_cd;
        self.l_ir + self.l_ic + w.lambda1 * (cc + self.l_p) + w.lambda2 * (fd + cd)
    }

    /// Named components, for diagnostics.
    pub fn components(&self) -> [(&'static str, f64); 7] {
        [
            ("l_ir", self.l_ir),
            ("l_ic", self.l_ic),
            ("l_cc", self.l_cc),
            ("l_p", self.l_p),
            ("l_fd", self.l_fd),
            ("l_cd", self.l_cd),
            ("total", self.total),
        ]
    }
}

fn tag(component: &'static str) -> impl Fn(DiffError) -> BdclError {
    move |source| BdclError::Loss { component, source }
}

fn sum_terms<T: Real>(g: &mut Graph<T>, terms: &[Var], scale: f64, component: &'static str) -> Result<Var> {
    let total = g.add_all(terms).map_err(tag(component))?;
    g.scale(total, T::of(scale)).map_err(tag(component))
}

/// `(1/N) Σ_ν Σ_i ||x_i^ν − x̂_i^ν||²`.
pub fn recon_loss<T: Real>(g: &mut Graph<T>, x: &[Var], x_hat: &[Var]) -> Result<Var> {
    let name = "l_ir";
    if x.len() != x_hat.len() || x.is_empty() {
        return Err(BdclError::Dimension(format!("{name}: {} inputs vs {} reconstructions", x.len(), x_hat.len())));
    }
    let n = g.value(x[0]).rows();
    let mut terms = Vec::with_capacity(x.len());
    for (&a, &b) in x.iter().zip(x_hat) {
        let d = g.sub(a, b).map_err(tag(name))?;
        let sq = g.square(d).map_err(tag(name))?;
        terms.push(g.sum(sq).map_err(tag(name))?);
    }
    sum_terms(g, &terms, 1.0 / n as f64, name)
}

/// Cosine similarity with both norms floored at `1e-12`.
pub fn cosine_sim(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(NORM_EPS);
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt().max(NORM_EPS);
    dot / (na * nb)
}

/// Instance contrastive loss over all ordered view pairs `(u, ν)`, `u ≠ ν`:
///
/// ```text
/// −(1/2N) Σ_{u≠ν} Σ_i log( e^{s(h_i^u, h_i^ν)/τ} /
///                          Σ_{j≠i} [e^{s(h_i^u, h_j^u)/τ} + e^{s(h_i^u, h_j^ν)/τ}] )
/// ```
///
/// The positive pair is not part of the denominator.
pub fn instance_contrastive_loss<T: Real>(g: &mut Graph<T>, h: &[Var], tau: f64) -> Result<Var> {
    let name = "l_ic";
    let n = g.value(h[0]).rows();
    if n < 2 {
        return Err(BdclError::Config(format!("{name}: batch size {n} leaves no negatives")));
    }
    if h.len() < 2 {
        return Err(BdclError::Config(format!("{name}: needs at least 2 views")));
    }
    let e = tag(name);
    let normalized: Vec<Var> = h
        .iter()
        .map(|&x| g.l2_normalize_rows(x, T::of(NORM_EPS)))
        .collect::<Result<_, _>>()
        .map_err(&e)?;
    let off_diag = Matrix::from_fn(n, n, |i, j| if i == j { T::zero() } else { T::one() });
    let inv_tau = T::of(1.0 / tau);
    // cosine ≤ 1, so shifting every logit by −1/τ keeps exp() ≤ 1
    let shift = T::of(-1.0 / tau);

    let sims = |g: &mut Graph<T>, a: Var, b: Var| -> Result<Var, DiffError> {
        let bt = g.transpose(b)?;
        let s = g.matmul(a, bt)?;
        let s = g.scale(s, inv_tau)?;
        g.add_scalar(s, shift)
    };
    let mut terms = Vec::new();
    for u in 0..h.len() {
        let same = sims(g, normalized[u], normalized[u]).map_err(&e)?;
        let same_exp = g.exp(same).map_err(&e)?;
        let same_neg = g.mul_const(same_exp, off_diag.clone()).map_err(&e)?;
        for v in 0..h.len() {
            if u == v {
                continue;
            }
            let term = (|| -> Result<Var, DiffError> {
                let cross = sims(g, normalized[u], normalized[v])?;
                let positive = g.diag(cross)?;
                let cross_exp = g.exp(cross)?;
                let cross_neg = g.mul_const(cross_exp, off_diag.clone())?;
                let negs = g.add(same_neg, cross_neg)?;
                let denom = g.row_sum(negs)?;
                let log_denom = g.ln(denom)?;
                let log_ratio = g.sub(positive, log_denom)?;
                g.sum(log_ratio)
            })()
            .map_err(&e)?;
            terms.push(term);
        }
    }
    sum_terms(g, &terms, -1.0 / (2.0 * n as f64), name)
}

/// `(1/4N) Σ_{u≠ν} Σ_i ( ||p_i^u − p_i^ν||² + ||p_i^u − p_{N_i}^ν||² )`,
/// where `p_{N_i}^ν` is the assignment of the noisy neighbor of sample `i`
/// in view `ν`.
pub fn cluster_consistency_loss<T: Real>(g: &mut Graph<T>, p: &[Var], p_neighbor: &[Var]) -> Result<Var> {
    let name = "l_cc";
    if p.len() != p_neighbor.len() || p.len() < 2 {
        return Err(BdclError::Dimension(format!("{name}: {} assignment views vs {} neighbor views", p.len(), p_neighbor.len())));
    }
    let n = g.value(p[0]).rows();
    let e = tag(name);
    let mut terms = Vec::new();
    for u in 0..p.len() {
        for v in 0..p.len() {
            if u == v {
                continue;
            }
            for other in [p[v], p_neighbor[v]] {
                let t = (|| -> Result<Var, DiffError> {
                    let d = g.sub(p[u], other)?;
                    let sq = g.square(d)?;
                    g.sum(sq)
                })()
                .map_err(&e)?;
                terms.push(t);
            }
        }
    }
    sum_terms(g, &terms, 1.0 / (4.0 * n as f64), name)
}

/// `Σ_ν Σ_j p'_j log p'_j` with `p'^ν` the column mean of `P^ν`.
pub fn assignment_regularizer<T: Real>(g: &mut Graph<T>, p: &[Var]) -> Result<Var> {
    let name = "l_p";
    let e = tag(name);
    let mut terms = Vec::with_capacity(p.len());
    for &pv in p {
        let t = (|| -> Result<Var, DiffError> {
            let mean = g.col_mean(pv)?;
            let ent = g.xlogx(mean)?;
            g.sum(ent)
        })()
        .map_err(&e)?;
        terms.push(t);
    }
    sum_terms(g, &terms, 1.0, name)
}

/// `Σ_ν (1/c²) ||X̄^νᵀ X̄^ν − I||²_F` where `X̄` has unit-norm columns and
/// `c` is the column count.
fn decoupling<T: Real>(g: &mut Graph<T>, xs: &[Var], name: &'static str) -> Result<Var> {
    let e = tag(name);
    let mut terms = Vec::with_capacity(xs.len());
    for &x in xs {
        let c = g.value(x).cols();
        let t = (|| -> Result<Var, DiffError> {
            let xn = g.l2_normalize_cols(x, T::of(NORM_EPS))?;
            let xt = g.transpose(xn)?;
            let gram = g.matmul(xt, xn)?;
            let off = g.add_const(gram, &Matrix::identity(c).scale(-T::one()))?;
            let sq = g.square(off)?;
            let s = g.sum(sq)?;
            g.scale(s, T::of(1.0 / (c * c) as f64))
        })()
        .map_err(&e)?;
        terms.push(t);
    }
    sum_terms(g, &terms, 1.0, name)
}

/// Feature-level decoupling on the embeddings `Z^ν`.
pub fn feature_decoupling_loss<T: Real>(g: &mut Graph<T>, z: &[Var]) -> Result<Var> {
    decoupling(g, z, "l_fd")
}

/// Cluster-level decoupling on the assignments `P^ν`.
pub fn cluster_decoupling_loss<T: Real>(g: &mut Graph<T>, p: &[Var]) -> Result<Var> {
    decoupling(g, p, "l_cd")
}

/// Builds every term and the weighted total. Returns the total's handle and
/// the per-term values.
pub fn total_loss<T: Real>(
    g: &mut Graph<T>,
    inputs: &[Var],
    outputs: &[ViewVars],
    weights: &LossWeights,
    ablation: &Ablation,
) -> Result<(Var, LossBreakdown)> {
    let x_hat: Vec<Var> = outputs.iter().map(|o| o.x_hat).collect();
    let z: Vec<Var> = outputs.iter().map(|o| o.z).collect();
    let h: Vec<Var> = outputs.iter().map(|o| o.h).collect();
    let p: Vec<Var> = outputs.iter().map(|o| o.p).collect();
    let p_nb: Vec<Var> = outputs.iter().map(|o| o.p_neighbor).collect();

    let l_ir = recon_loss(g, inputs, &x_hat)?;
    let l_ic = instance_contrastive_loss(g, &h, weights.tau)?;
    let l_cc = cluster_consistency_loss(g, &p, &p_nb)?;
    let l_p = assignment_regularizer(g, &p)?;
    let l_fd = feature_decoupling_loss(g, &z)?;
    let l_cd = cluster_decoupling_loss(g, &p)?;

    let w = |x: f64| T::of(x);
    let e = tag("total");
    let cc = g.scale(l_cc, w(Ablation::mask(ablation.no_cc))).map_err(&e)?;
    let clustering = g.add(cc, l_p).map_err(&e)?;
    let clustering = g.scale(clustering, w(weights.lambda1)).map_err(&e)?;
    let fd = g.scale(l_fd, w(Ablation::mask(ablation.no_fd))).map_err(&e)?;
    let cd = g.scale(l_cd, w(Ablation::mask(ablation.no_cd))).map_err(&e)?;
    let decouple = g.add(fd, cd).map_err(&e)?;
    let decouple = g.scale(decouple, w(weights.lambda2)).map_err(&e)?;
    let total = g.add_all(&[l_ir, l_ic, clustering, decouple]).map_err(&e)?;

    let breakdown = LossBreakdown {
        l_ir: g.scalar(l_ir).as_f64(),
        l_ic: g.scalar(l_ic).as_f64(),
        l_cc: g.scalar(l_cc).as_f64(),
        l_p: g.scalar(l_p).as_f64(),
        l_fd: g.scalar(l_fd).as_f64(),
        l_cd: g.scalar(l_cd).as_f64(),
        total: g.scalar(total).as_f64(),
    };
    Ok((total, breakdown))
}

/// `Z + σE` with `E ~ N(0, I)` from a stream keyed by `seed`.
pub fn sample_neighbors<T: Real>(z: &Matrix<T>, sigma: f64, seed: u64) -> Matrix<T> {
    if sigma == 0.0 {
        return z.clone();
    }
    let mut r = rng::rng_for(seed, &[STREAM_NOISE]);
    let noise = normal_matrix::<T>(z.rows(), z.cols(), sigma, &mut r);
    z.add(&noise).expect("noise has the shape of z")
}

/// Loss values on plain matrices.
pub mod values {
    use super::*;
    use crate::model::ForwardBundle;

    fn run<T: Real>(
        inputs: &[&[Matrix<T>]],
        f: impl FnOnce(&mut Graph<T>, &[Vec<Var>]) -> Result<Var>,
    ) -> Result<T> {
        let mut g = Graph::new();
        let vars: Vec<Vec<Var>> = inputs
            .iter()
            .map(|group| group.iter().map(|m| g.constant(m.clone())).collect())
            .collect();
        let out = f(&mut g, &vars)?;
        Ok(g.scalar(out))
    }

    fn check_same_shapes<T: Real>(a: &[Matrix<T>], b: &[Matrix<T>], name: &str) -> Result<()> {
        if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.shape() != y.shape()) {
            return Err(BdclError::Dimension(format!("{name}: view shapes differ")));
        }
        Ok(())
    }

    pub fn recon_loss<T: Real>(x: &[Matrix<T>], x_hat: &[Matrix<T>]) -> Result<T> {
        check_same_shapes(x, x_hat, "l_ir")?;
        run(&[x, x_hat], |g, v| super::recon_loss(g, &v[0], &v[1]))
    }

    pub fn instance_contrastive_loss<T: Real>(h: &[Matrix<T>], tau: f64) -> Result<T> {
        run(&[h], |g, v| super::instance_contrastive_loss(g, &v[0], tau))
    }

    pub fn cluster_consistency_loss<T: Real>(p: &[Matrix<T>], p_neighbor: &[Matrix<T>]) -> Result<T> {
        check_same_shapes(p, p_neighbor, "l_cc")?;
        run(&[p, p_neighbor], |g, v| super::cluster_consistency_loss(g, &v[0], &v[1]))
    }

    pub fn assignment_regularizer<T: Real>(p: &[Matrix<T>]) -> Result<T> {
        run(&[p], |g, v| super::assignment_regularizer(g, &v[0]))
    }

    pub fn feature_decoupling_loss<T: Real>(z: &[Matrix<T>]) -> Result<T> {
        run(&[z], |g, v| super::feature_decoupling_loss(g, &v[0]))
    }

    pub fn cluster_decoupling_loss<T: Real>(p: &[Matrix<T>]) -> Result<T> {
        run(&[p], |g, v| super::cluster_decoupling_loss(g, &v[0]))
    }

    /// All terms for an already computed forward pass.
    pub fn total_loss<T: Real>(
        bundle: &ForwardBundle<T>,
        batch: &[Matrix<T>],
        weights: &LossWeights,
        ablation: &Ablation,
    ) -> Result<LossBreakdown> {
        let mut g = Graph::new();
        let inputs: Vec<Var> = batch.iter().map(|x| g.constant(x.clone())).collect();
        let outputs: Vec<ViewVars> = bundle
            .views
            .iter()
            .map(|v| ViewVars {
                z: g.constant(v.z.clone()),
                x_hat: g.constant(v.x_hat.clone()),
                h: g.constant(v.h.clone()),
                p: g.constant(v.p.clone()),
                p_neighbor: g.constant(v.p_neighbor.clone()),
            })
            .collect();
        let (_, breakdown) = super::total_loss(&mut g, &inputs, &outputs, weights, ablation)?;
        Ok(breakdown)
    }
}
