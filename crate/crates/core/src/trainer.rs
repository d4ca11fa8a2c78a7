//! The two training phases, final prediction and evaluation.
//!
//! Pretraining fits the autoencoders on reconstruction alone with the heads
//! frozen. The clustering phase then optimizes the full weighted objective
//! over every parameter. Each phase starts with a fresh Adam state and both
//! use the same learning rate.

use std::time::Instant;

use diffcore::{Adam, AdamConfig, Graph, Matrix, Real, Var};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::MultiViewDataset;
use crate::error::{BdclError, Result};
use crate::losses::{self, Ablation, LossBreakdown, LossWeights};
use crate::metrics::{self, MetricsReport};
use crate::model::{autoencode_on_graph, forward_on_graph, forward_views, neighbor_noise, ModelState, ParamScope};
use crate::rng::{self, STREAM_EVAL, STREAM_NOISE, STREAM_SHUFFLE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let a = AdamConfig::default();
        Self {
            lr: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
        }
    }
}

impl From<OptimizerConfig> for AdamConfig {
    fn from(o: OptimizerConfig) -> Self {
        AdamConfig {
            lr: o.lr,
            beta1: o.beta1,
            beta2: o.beta2,
            eps: o.eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Reconstruction-only epochs.
    pub pretrain_epochs: usize,
    /// Joint-objective epochs.
    pub cluster_epochs: usize,
    pub batch_size: usize,
    pub weights: LossWeights,
    pub ablation: Ablation,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub shuffle: bool,
    /// Progress is reported every this many epochs (0 = never). Log records
    /// are kept for every epoch regardless.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            pretrain_epochs: 200,
            cluster_epochs: 300,
            batch_size: 256,
            weights: LossWeights::default(),
            ablation: Ablation::default(),
            optimizer: OptimizerConfig::default(),
            seed: 0,
            shuffle: true,
            log_every: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(BdclError::Config(format!("batch_size must be >= 2, got {}", self.batch_size)));
        }
        let o = &self.optimizer;
        if !(o.lr > 0.0 && o.lr.is_finite()) {
            return Err(BdclError::Config(format!("lr must be > 0, got {}", o.lr)));
        }
        if !((0.0..1.0).contains(&o.beta1) && (0.0..1.0).contains(&o.beta2)) {
            return Err(BdclError::Config("adam betas must lie in [0, 1)".into()));
        }
        if !(o.eps > 0.0) {
            return Err(BdclError::Config("adam eps must be > 0".into()));
        }
        self.weights.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pretrain,
    Cluster,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Pretrain => "pretrain",
            Phase::Cluster => "cluster",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Phase::Pretrain => 0,
            Phase::Cluster => 1,
        }
    }
}

/// Sample-weighted epoch means of every loss term. During pretraining only
/// `l_ir` is computed and `total = l_ir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRecord {
    pub phase: Phase,
    /// 1-based.
    pub epoch: usize,
    pub losses: LossBreakdown,
    /// Seconds since the phase started.
    pub wall_time: f64,
}

/// Converts the dataset to the model precision after checking that its
/// views line up with the model.
pub fn dataset_views<T: Real>(model: &ModelState<T>, data: &MultiViewDataset) -> Result<Vec<Matrix<T>>> {
    let dims = data.dims();
    let expected: Vec<usize> = model.specs.iter().map(|s| s.input_dim).collect();
    if dims != expected {
        return Err(BdclError::Config(format!("model expects view dims {expected:?}, dataset has {dims:?}")));
    }
    Ok(data.views.iter().map(|x| x.cast()).collect())
}

/// Minibatch index lists for one epoch. Every sample appears once; a trailing
/// batch of size 1 is dropped.
pub fn epoch_batches(n: usize, batch_size: usize, shuffle: bool, seed: u64, phase: Phase, epoch: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        let mut r = rng::rng_for(seed, &[STREAM_SHUFFLE, phase.tag(), epoch as u64]);
        order.shuffle(&mut r);
    }
    order
        .chunks(batch_size.max(1))
        .filter(|c| c.len() >= 2)
        .map(<[usize]>::to_vec)
        .collect()
}

fn gather<T: Real>(views: &[Matrix<T>], idx: &[usize]) -> Vec<Matrix<T>> {
    views.iter().map(|x| x.select_rows(idx)).collect()
}

fn non_finite(phase: Phase, epoch: usize) -> impl Fn(BdclError) -> BdclError {
    move |e| match e {
        BdclError::Loss {
            component,
            source: diffcore::DiffError::NonFinite { .. },
        } => BdclError::NonFiniteLoss {
            component,
            phase: phase.name(),
            epoch,
        },
        BdclError::Diff(diffcore::DiffError::NonFinite { .. }) => BdclError::NonFiniteLoss {
            component: "forward",
            phase: phase.name(),
            epoch,
        },
        other => other,
    }
}

fn apply_step<T: Real>(
    g: &Graph<T>,
    root: Var,
    params: &[Var],
    model: &mut ModelState<T>,
    scope: ParamScope,
    adam: &mut Adam<T>,
) -> Result<()> {
    let grads = g.backward(root)?;
    let grads: Vec<Option<&Matrix<T>>> = params.iter().map(|&p| grads.get(p)).collect();
    adam.step(&mut model.params_mut(scope), &grads)?;
    Ok(())
}

fn new_adam<T: Real>(model: &ModelState<T>, scope: ParamScope, cfg: &TrainConfig) -> Adam<T> {
    Adam::new(cfg.optimizer.into(), model.params(scope).iter().map(|p| p.shape()))
}

fn report(cfg: &TrainConfig, rec: &TrainLogRecord, epochs: usize) {
    if cfg.log_every > 0 && (rec.epoch % cfg.log_every == 0 || rec.epoch == epochs) {
        let l = &rec.losses;
        eprintln!(
            "[{}] epoch {}/{} total {:.6} ir {:.6} ic {:.6} cc {:.6} p {:.6} fd {:.6} cd {:.6}",
            rec.phase.name(),
            rec.epoch,
            epochs,
            l.total,
            l.l_ir,
            l.l_ic,
            l.l_cc,
            l.l_p,
            l.l_fd,
            l.l_cd
        );
    }
}

#[derive(Default)]
struct EpochMean {
    sum: LossBreakdown,
    rows: usize,
}

impl EpochMean {
    fn add(&mut self, b: &LossBreakdown, rows: usize) {
        let w = rows as f64;
        let s = &mut self.sum;
        s.l_ir += w * b.l_ir;
        s.l_ic += w * b.l_ic;
        s.l_cc += w * b.l_cc;
        s.l_p += w * b.l_p;
        s.l_fd += w * b.l_fd;
        s.l_cd += w * b.l_cd;
        s.total += w * b.total;
        self.rows += rows;
    }

    fn finish(self) -> LossBreakdown {
        let w = 1.0 / self.rows.max(1) as f64;
        let s = self.sum;
        LossBreakdown {
            l_ir: w * s.l_ir,
            l_ic: w * s.l_ic,
            l_cc: w * s.l_cc,
            l_p: w * s.l_p,
            l_fd: w * s.l_fd,
            l_cd: w * s.l_cd,
            total: w * s.total,
        }
    }
}

/// Reconstruction-only training of the encoders and decoders. Head weights
/// are left untouched.
pub fn pretrain<T: Real>(model: &mut ModelState<T>, data: &MultiViewDataset, cfg: &TrainConfig) -> Result<Vec<TrainLogRecord>> {
    cfg.validate()?;
    let views = dataset_views(model, data)?;
    let scope = ParamScope::Autoencoders;
    let mut adam = new_adam(model, scope, cfg);
    let start = Instant::now();
    let mut log = Vec::with_capacity(cfg.pretrain_epochs);
    for epoch in 1..=cfg.pretrain_epochs {
        let on_err = non_finite(Phase::Pretrain, epoch);
        let mut mean = EpochMean::default();
        for idx in epoch_batches(data.n(), cfg.batch_size, cfg.shuffle, cfg.seed, Phase::Pretrain, epoch) {
            let batch = gather(&views, &idx);
            let mut g = Graph::new();
            let bound = model.bind(&mut g, scope);
            let inputs: Vec<Var> = batch.into_iter().map(|x| g.constant(x)).collect();
            let outs = autoencode_on_graph(&mut g, &bound, &inputs).map_err(&on_err)?;
            let x_hat: Vec<Var> = outs.iter().map(|&(_, xh)| xh).collect();
            let loss = losses::recon_loss(&mut g, &inputs, &x_hat).map_err(&on_err)?;
            let l_ir = g.scalar(loss).as_f64();
            mean.add(&LossBreakdown { l_ir, total: l_ir, ..Default::default() }, idx.len());
            apply_step(&g, loss, &bound.param_vars(), model, scope, &mut adam)?;
        }
        let rec = TrainLogRecord {
            phase: Phase::Pretrain,
            epoch,
            losses: mean.finish(),
            wall_time: start.elapsed().as_secs_f64(),
        };
        report(cfg, &rec, cfg.pretrain_epochs);
        log.push(rec);
    }
    Ok(log)
}

/// Joint optimization of every loss term over all parameters. Neighbor
/// noise is drawn afresh for every step.
pub fn train_clustering<T: Real>(model: &mut ModelState<T>, data: &MultiViewDataset, cfg: &TrainConfig) -> Result<Vec<TrainLogRecord>> {
    cfg.validate()?;
    let views = dataset_views(model, data)?;
    let scope = ParamScope::All;
    let dims: Vec<usize> = model.specs.iter().map(|s| s.embedding_dim).collect();
    let mut adam = new_adam(model, scope, cfg);
    let start = Instant::now();
    let mut log = Vec::with_capacity(cfg.cluster_epochs);
    let mut step = 0u64;
    for epoch in 1..=cfg.cluster_epochs {
        let on_err = non_finite(Phase::Cluster, epoch);
        let mut mean = EpochMean::default();
        for idx in epoch_batches(data.n(), cfg.batch_size, cfg.shuffle, cfg.seed, Phase::Cluster, epoch) {
            let batch = gather(&views, &idx);
            let mut g = Graph::new();
            let bound = model.bind(&mut g, scope);
            let inputs: Vec<Var> = batch.into_iter().map(|x| g.constant(x)).collect();
            let noise_seed = rng::derive_seed(cfg.seed, &[STREAM_NOISE, step]);
            let noise = neighbor_noise::<T>(idx.len(), &dims, cfg.weights.sigma, noise_seed);
            let outs = forward_on_graph(&mut g, &bound, &inputs, noise.as_deref()).map_err(&on_err)?;
            let (total, breakdown) =
                losses::total_loss(&mut g, &inputs, &outs, &cfg.weights, &cfg.ablation).map_err(&on_err)?;
            mean.add(&breakdown, idx.len());
            apply_step(&g, total, &bound.param_vars(), model, scope, &mut adam)?;
            step += 1;
        }
        let rec = TrainLogRecord {
            phase: Phase::Cluster,
            epoch,
            losses: mean.finish(),
            wall_time: start.elapsed().as_secs_f64(),
        };
        report(cfg, &rec, cfg.cluster_epochs);
        log.push(rec);
    }
    Ok(log)
}

/// Row-wise argmax of the view-averaged assignments; ties go to the lowest
/// cluster index.
pub fn labels_from_assignments<T: Real>(p: &[Matrix<T>]) -> Result<Vec<usize>> {
    let first = p.first().ok_or_else(|| BdclError::Dimension("no assignment matrices".into()))?;
    let mut mean = Matrix::<f64>::zeros(first.rows(), first.cols());
    for m in p {
        mean.add_assign(&m.cast())?;
    }
    Ok(mean.scale(1.0 / p.len() as f64).argmax_rows())
}

/// Final labels plus the per-view assignment matrices, on the full dataset
/// without neighbor noise.
pub fn predict_assignments<T: Real>(model: &ModelState<T>, data: &MultiViewDataset) -> Result<(Vec<usize>, Vec<Matrix<T>>)> {
    let views = dataset_views(model, data)?;
    let bundle = forward_views(model, &views, 0.0, 0)?;
    let p: Vec<Matrix<T>> = bundle.views.into_iter().map(|v| v.p).collect();
    Ok((labels_from_assignments(&p)?, p))
}

/// Predicted labels and the full report: metrics when labels exist, every
/// loss term on the whole dataset (neighbor noise from a dedicated eval
/// stream) and the coupling diagnostics.
pub fn evaluate<T: Real>(model: &ModelState<T>, data: &MultiViewDataset, cfg: &TrainConfig) -> Result<(Vec<usize>, MetricsReport)> {
    let views = dataset_views(model, data)?;
    let (labels, _) = predict_assignments(model, data)?;
    let eval_seed = rng::derive_seed(cfg.seed, &[STREAM_EVAL]);
    let bundle = forward_views(model, &views, cfg.weights.sigma, eval_seed)?;
    let mut losses = losses::values::total_loss(&bundle, &views, &cfg.weights, &cfg.ablation)?;
    losses.total = losses.combine(&cfg.weights, &cfg.ablation);
    let coupling = metrics::coupling_matrices(model, &views)?;
    let (acc, nmi, pur, matching) = metrics::score(&labels, data)?;
    let mut cluster_sizes = vec![0; model.clusters];
    for &l in &labels {
        cluster_sizes[l] += 1;
    }
    let report = MetricsReport {
        dataset: data.name.clone(),
        n: data.n(),
        k: model.clusters,
        acc,
        nmi,
        pur,
        matching,
        cluster_sizes,
        losses,
        coupling,
    };
    Ok((labels, report))
}
