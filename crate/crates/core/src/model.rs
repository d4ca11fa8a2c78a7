//! Per-view autoencoders with a contrastive head and a clustering head.
//!
//! Each view ν owns an encoder `X^ν → Z^ν`, a mirrored decoder
//! `Z^ν → X̂^ν`, a one-layer contrastive head `Z^ν → H^ν` and a one-layer
//! clustering head `Z^ν → P^ν` followed by a row softmax. Views share no
//! weights; they only interact through the losses.

use diffcore::{Graph, Matrix, Real, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BdclError, Result};
use crate::rng::{self, normal_matrix, STREAM_INIT, STREAM_NOISE};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub embedding_dim: usize,
}

impl ViewSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>, embedding_dim: usize) -> Self {
        Self {
            input_dim,
            hidden,
            embedding_dim,
        }
    }

    /// Layer widths from input to embedding.
    fn encoder_widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_dim);
        w.extend(&self.hidden);
        w.push(self.embedding_dim);
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T: Real = f64> {
    /// `din×dout`
    pub weight: Matrix<T>,
    /// `1×dout`
    pub bias: Matrix<T>,
}

impl<T: Real> Linear<T> {
    /// Uniform on `±sqrt(6 / fan_in)`, so the weight std is `sqrt(2 / fan_in)`.
    /// Biases start at zero.
    fn kaiming_uniform(din: usize, dout: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / din as f64).sqrt();
        Self {
            weight: Matrix::from_fn(din, dout, |_, _| T::of(rng.random_range(-bound..bound))),
            bias: Matrix::zeros(1, dout),
        }
    }

    fn cast<U: Real>(&self) -> Linear<U> {
        Linear {
            weight: self.weight.cast(),
            bias: self.bias.cast(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewNet<T: Real = f64> {
    pub encoder: Vec<Linear<T>>,
    pub decoder: Vec<Linear<T>>,
    pub contrastive_head: Linear<T>,
    pub cluster_head: Linear<T>,
}

/// Which parameters an operation touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamScope {
    All,
    /// Encoders and decoders only.
    Autoencoders,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState<T: Real = f64> {
    pub specs: Vec<ViewSpec>,
    pub contrastive_dim: usize,
    pub clusters: usize,
    pub views: Vec<ViewNet<T>>,
}

/// Values produced for one view by [`forward_views`].
#[derive(Debug, Clone, PartialEq)]
pub struct ViewForward<T: Real = f64> {
    pub z: Matrix<T>,
    pub x_hat: Matrix<T>,
    pub h: Matrix<T>,
    pub p: Matrix<T>,
    pub p_neighbor: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardBundle<T: Real = f64> {
    pub views: Vec<ViewForward<T>>,
}

/// Graph handles of one view's outputs.
#[derive(Debug, Clone, Copy)]
pub struct ViewVars {
    pub z: Var,
    pub x_hat: Var,
    pub h: Var,
    pub p: Var,
    pub p_neighbor: Var,
}

#[derive(Debug, Clone, Copy)]
struct BoundLinear {
    weight: Var,
    bias: Var,
}

#[derive(Debug, Clone)]
struct BoundView {
    encoder: Vec<BoundLinear>,
    decoder: Vec<BoundLinear>,
    contrastive_head: BoundLinear,
    cluster_head: BoundLinear,
}

/// A model whose parameters live on a [`Graph`].
#[derive(Debug, Clone)]
pub struct BoundModel {
    views: Vec<BoundView>,
    scope: ParamScope,
}

impl BoundModel {
    /// Parameter handles in the same order as [`ModelState::params`] for
    /// the scope the model was bound with.
    pub fn param_vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        for v in &self.views {
            for l in v.encoder.iter().chain(&v.decoder) {
                out.extend([l.weight, l.bias]);
            }
            if self.scope == ParamScope::All {
                for l in [&v.contrastive_head, &v.cluster_head] {
                    out.extend([l.weight, l.bias]);
                }
            }
        }
        out
    }
}

fn apply_layers<T: Real>(g: &mut Graph<T>, layers: &[BoundLinear], x: Var) -> Result<Var> {
    let mut cur = x;
    for (i, l) in layers.iter().enumerate() {
        cur = g.linear(cur, l.weight, l.bias)?;
        if i + 1 < layers.len() {
            cur = g.relu(cur)?;
        }
    }
    Ok(cur)
}

/// Builds a model with fan-in scaled uniform weights. Deterministic per seed;
/// view `ν` draws from its own stream so identical specs at the same index
/// get identical weights.
pub fn init_model<T: Real>(specs: &[ViewSpec], contrastive_dim: usize, clusters: usize, seed: u64) -> Result<ModelState<T>> {
    if specs.len() < 2 {
        return Err(BdclError::Config(format!("need at least 2 views, got {}", specs.len())));
    }
    if clusters < 2 {
        return Err(BdclError::Config(format!("need K >= 2, got {clusters}")));
    }
    if contrastive_dim < 1 {
        return Err(BdclError::Config("contrastive dimension must be >= 1".into()));
    }
    let mut views = Vec::with_capacity(specs.len());
    for (v, spec) in specs.iter().enumerate() {
        validate_spec(v, spec, contrastive_dim)?;
        let mut rng = rng::rng_for(seed, &[STREAM_INIT, v as u64]);
        let widths = spec.encoder_widths();
        let encoder = widths
            .windows(2)
            .map(|w| Linear::kaiming_uniform(w[0], w[1], &mut rng))
            .collect();
        let decoder = widths
            .windows(2)
            .rev()
            .map(|w| Linear::kaiming_uniform(w[1], w[0], &mut rng))
            .collect();
        let m = spec.embedding_dim;
        views.push(ViewNet {
            encoder,
            decoder,
            contrastive_head: Linear::kaiming_uniform(m, contrastive_dim, &mut rng),
            cluster_head: Linear::kaiming_uniform(m, clusters, &mut rng),
        });
    }
    Ok(ModelState {
        specs: specs.to_vec(),
        contrastive_dim,
        clusters,
        views,
    })
}

fn validate_spec(v: usize, spec: &ViewSpec, q: usize) -> Result<()> {
    if spec.input_dim < 1 || spec.embedding_dim < 1 || spec.hidden.contains(&0) {
        return Err(BdclError::Config(format!("view {v}: all layer widths must be >= 1")));
    }
    if q >= spec.embedding_dim {
        return Err(BdclError::Config(format!(
            "view {v}: contrastive dim {q} must be smaller than embedding dim {}",
            spec.embedding_dim
        )));
    }
    Ok(())
}

impl<T: Real> ModelState<T> {
    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    /// Parameters in a fixed order: per view, encoder then decoder layers
    /// (weight, bias), then the contrastive and clustering heads.
    pub fn params(&self, scope: ParamScope) -> Vec<&Matrix<T>> {
        let mut out = Vec::new();
        for v in &self.views {
            for l in v.encoder.iter().chain(&v.decoder) {
                out.extend([&l.weight, &l.bias]);
            }
            if scope == ParamScope::All {
                for l in [&v.contrastive_head, &v.cluster_head] {
                    out.extend([&l.weight, &l.bias]);
                }
            }
        }
        out
    }

    pub fn params_mut(&mut self, scope: ParamScope) -> Vec<&mut Matrix<T>> {
        let mut out = Vec::new();
        for v in &mut self.views {
            for l in v.encoder.iter_mut().chain(v.decoder.iter_mut()) {
                out.push(&mut l.weight);
                out.push(&mut l.bias);
            }
            if scope == ParamScope::All {
                for l in [&mut v.contrastive_head, &mut v.cluster_head] {
                    out.push(&mut l.weight);
                    out.push(&mut l.bias);
                }
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.params(ParamScope::All).iter().all(|p| p.is_finite())
    }

    pub fn cast<U: Real>(&self) -> ModelState<U> {
        ModelState {
            specs: self.specs.clone(),
            contrastive_dim: self.contrastive_dim,
            clusters: self.clusters,
            views: self
                .views
                .iter()
                .map(|v| ViewNet {
                    encoder: v.encoder.iter().map(Linear::cast).collect(),
                    decoder: v.decoder.iter().map(Linear::cast).collect(),
                    contrastive_head: v.contrastive_head.cast(),
                    cluster_head: v.cluster_head.cast(),
                })
                .collect(),
        }
    }

    /// Places the parameters on `g`. Parameters inside `scope` are trainable
    /// leaves; the rest are constants.
    pub fn bind(&self, g: &mut Graph<T>, scope: ParamScope) -> BoundModel {
        let mut bind_linear = |l: &Linear<T>, trainable: bool| {
            let (w, b) = (l.weight.clone(), l.bias.clone());
            if trainable {
                BoundLinear {
                    weight: g.param(w),
                    bias: g.param(b),
                }
            } else {
                BoundLinear {
                    weight: g.constant(w),
                    bias: g.constant(b),
                }
            }
        };
        let heads_trainable = scope == ParamScope::All;
        let views = self
            .views
            .iter()
            .map(|v| BoundView {
                encoder: v.encoder.iter().map(|l| bind_linear(l, true)).collect(),
                decoder: v.decoder.iter().map(|l| bind_linear(l, true)).collect(),
                contrastive_head: bind_linear(&v.contrastive_head, heads_trainable),
                cluster_head: bind_linear(&v.cluster_head, heads_trainable),
            })
            .collect();
        BoundModel { views, scope }
    }

    pub(crate) fn check_batch(&self, batch: &[Matrix<T>]) -> Result<usize> {
        if batch.len() != self.views.len() {
            return Err(BdclError::Dimension(format!(
                "model has {} views, batch has {}",
                self.views.len(),
                batch.len()
            )));
        }
        let rows = batch[0].rows();
        for (v, (x, spec)) in batch.iter().zip(&self.specs).enumerate() {
            if x.cols() != spec.input_dim || x.rows() != rows {
                return Err(BdclError::Dimension(format!(
                    "view {v}: expected {rows}x{}, got {}x{}",
                    spec.input_dim,
                    x.rows(),
                    x.cols()
                )));
            }
        }
        Ok(rows)
    }
}

/// Encoder and decoder only; used by the reconstruction-only phase.
pub fn autoencode_on_graph<T: Real>(g: &mut Graph<T>, bound: &BoundModel, inputs: &[Var]) -> Result<Vec<(Var, Var)>> {
    bound
        .views
        .iter()
        .zip(inputs)
        .map(|(v, &x)| {
            let z = apply_layers(g, &v.encoder, x)?;
            let x_hat = apply_layers(g, &v.decoder, z)?;
            Ok((z, x_hat))
        })
        .collect()
}

/// Full forward pass on `g`. `noise[ν]` is the already-scaled perturbation
/// `σE` added to `Z^ν` before the clustering head; `None` means `σ = 0`.
pub fn forward_on_graph<T: Real>(
    g: &mut Graph<T>,
    bound: &BoundModel,
    inputs: &[Var],
    noise: Option<&[Matrix<T>]>,
) -> Result<Vec<ViewVars>> {
    let mut out = Vec::with_capacity(inputs.len());
    for (idx, (v, &x)) in bound.views.iter().zip(inputs).enumerate() {
        let z = apply_layers(g, &v.encoder, x)?;
        let x_hat = apply_layers(g, &v.decoder, z)?;
        let h = g.linear(z, v.contrastive_head.weight, v.contrastive_head.bias)?;
        let logits = g.linear(z, v.cluster_head.weight, v.cluster_head.bias)?;
        let p = g.softmax_rows(logits)?;
        let p_neighbor = match noise {
            Some(n) => {
                let z_nb = g.add_const(z, &n[idx])?;
                let logits_nb = g.linear(z_nb, v.cluster_head.weight, v.cluster_head.bias)?;
                g.softmax_rows(logits_nb)?
            }
            None => p,
        };
        out.push(ViewVars {
            z,
            x_hat,
            h,
            p,
            p_neighbor,
        });
    }
    Ok(out)
}

/// Scaled neighbor noise `σE` for every view, `E ~ N(0, I)`, drawn from a
/// stream keyed by `seed` and the view index. `None` when `σ = 0`.
pub fn neighbor_noise<T: Real>(rows: usize, dims: &[usize], sigma: f64, seed: u64) -> Option<Vec<Matrix<T>>> {
    (sigma != 0.0).then(|| {
        dims.iter()
            .enumerate()
            .map(|(v, &m)| {
                let mut r = rng::rng_for(seed, &[STREAM_NOISE, v as u64]);
                normal_matrix(rows, m, sigma, &mut r)
            })
            .collect()
    })
}

/// Runs every view through its autoencoder and heads. Neighbor assignments
/// use `Z^ν + σE` with `E` drawn from `seed`.
pub fn forward_views<T: Real>(model: &ModelState<T>, batch: &[Matrix<T>], sigma: f64, seed: u64) -> Result<ForwardBundle<T>> {
    let rows = model.check_batch(batch)?;
    let mut g = Graph::new();
    let bound = model.bind(&mut g, ParamScope::All);
    let inputs: Vec<Var> = batch.iter().map(|x| g.constant(x.clone())).collect();
    let dims: Vec<usize> = model.specs.iter().map(|s| s.embedding_dim).collect();
    let noise = neighbor_noise(rows, &dims, sigma, seed);
    let vars = forward_on_graph(&mut g, &bound, &inputs, noise.as_deref())?;
    Ok(ForwardBundle {
        views: vars
            .into_iter()
            .map(|v| ViewForward {
                z: g.value(v.z).clone(),
                x_hat: g.value(v.x_hat).clone(),
                h: g.value(v.h).clone(),
                p: g.value(v.p).clone(),
                p_neighbor: g.value(v.p_neighbor).clone(),
            })
            .collect(),
    })
}
