//! Command implementations behind the `bdcl` binary.
//!
//! `generate` writes a synthetic dataset, `train` runs both phases and
//! writes every artifact, `evaluate` scores a checkpoint on a dataset.
//! Flag values override the config file, which overrides the defaults.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use diffcore::Real;

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::{DatasetSource, Precision, RunConfig};
use crate::data::{save_dataset, write_matrix_csv, MultiViewDataset};
use crate::error::{BdclError, Result};
use crate::metrics::MetricsReport;
use crate::model::{init_model, ModelState};
use crate::trainer::{evaluate, pretrain, train_clustering, TrainLogRecord};
use crate::Matrix;

pub const RESOLVED_CONFIG: &str = "resolved_config.json";
pub const TRAIN_LOG: &str = "train_log.jsonl";
pub const CHECKPOINT: &str = "checkpoint.bin";
pub const METRICS: &str = "metrics.json";

#[derive(Debug, Parser)]
#[command(name = "bdcl", version, about = "Multi-view clustering with bi-level decoupling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset (CSV views, labels, manifest).
    Generate(GenerateArgs),
    /// Pretrain, train and evaluate; writes config, log, checkpoint and metrics.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset and export coupling matrices.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Generator seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for the dataset.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training seed.
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// Comma-separated seeds; each run goes to `<out>/seed_<s>`.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Drop both decoupling terms.
    #[arg(long)]
    pub no_bd: bool,
    /// Drop feature-level decoupling.
    #[arg(long)]
    pub no_fd: bool,
    /// Drop cluster-level decoupling.
    #[arg(long)]
    pub no_cd: bool,
    /// Drop cluster consistency.
    #[arg(long)]
    pub no_cc: bool,
    #[arg(long)]
    pub pretrain_epochs: Option<usize>,
    #[arg(long)]
    pub cluster_epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Run config; defaults to the resolved config next to the checkpoint.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset manifest, overriding the config's dataset.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Output directory; defaults to the checkpoint's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::from_file(p),
        None => Ok(RunConfig::default()),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| BdclError::io(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| BdclError::io(path, e))
}

/// Generates the configured synthetic dataset into `out`. Returns the
/// manifest path.
pub fn cmd_generate(cfg: &RunConfig, out: &Path) -> Result<PathBuf> {
    let DatasetSource::Synthetic(spec) = &cfg.dataset else {
        return Err(BdclError::Config("generate needs a synthetic dataset source".into()));
    };
    let ds = crate::data::generate_synthetic(spec)?;
    let manifest = save_dataset(&ds, out)?;
    println!("wrote {} (N={}, K={}, dims={:?})", manifest.display(), ds.n(), ds.k, ds.dims());
    Ok(manifest)
}

/// Everything a training run produces, before anything touches disk.
#[derive(Debug, Clone)]
pub struct RunOutcome<T: Real = f64> {
    pub model: ModelState<T>,
    pub log: Vec<TrainLogRecord>,
    pub labels: Vec<usize>,
    pub report: MetricsReport,
}

/// Initializes, pretrains, trains and evaluates on an already loaded
/// dataset.
pub fn run_training<T: Real>(cfg: &RunConfig, data: &MultiViewDataset) -> Result<RunOutcome<T>> {
    cfg.validate()?;
    let specs = cfg.model.view_specs(&data.dims());
    let mut model = init_model::<T>(&specs, cfg.model.contrastive_dim, data.k, cfg.train.seed)?;
    let mut log = pretrain(&mut model, data, &cfg.train)?;
    log.extend(train_clustering(&mut model, data, &cfg.train)?);
    let (labels, report) = evaluate(&model, data, &cfg.train)?;
    Ok(RunOutcome {
        model,
        log,
        labels,
        report,
    })
}

fn write_report(report: &MetricsReport, out: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report)? + "\n";
    write_file(&out.join(METRICS), text.as_bytes())?;
    for c in &report.coupling {
        write_matrix_csv(&out.join(format!("coupling_z_view{}.csv", c.view)), &Matrix::from_rows(&c.z)?)?;
        write_matrix_csv(&out.join(format!("coupling_p_view{}.csv", c.view)), &Matrix::from_rows(&c.p)?)?;
    }
    Ok(())
}

fn train_typed<T: Real>(cfg: &RunConfig, data: &MultiViewDataset) -> Result<MetricsReport> {
    let out = &cfg.out_dir;
    create_dir(out)?;
    write_file(&out.join(RESOLVED_CONFIG), cfg.to_json()?.as_bytes())?;
    let run = run_training::<T>(cfg, data)?;

    let path = out.join(TRAIN_LOG);
    let mut log = Vec::new();
    for rec in &run.log {
        serde_json::to_writer(&mut log, rec)?;
        log.push(b'\n');
    }
    write_file(&path, &log)?;
    save_checkpoint(&run.model, &cfg.train, &cfg.hash()?, &out.join(CHECKPOINT))?;
    write_report(&run.report, out)?;
    Ok(run.report)
}

/// One full run into `cfg.out_dir`.
pub fn cmd_train(cfg: &RunConfig) -> Result<MetricsReport> {
    let data = cfg.load_dataset()?;
    let report = match cfg.precision {
        Precision::F64 => train_typed::<f64>(cfg, &data)?,
        Precision::F32 => train_typed::<f32>(cfg, &data)?,
    };
    print_summary(&cfg.out_dir, &report);
    Ok(report)
}

fn print_summary(out: &Path, r: &MetricsReport) {
    let fmt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!(
        "{}: acc {} nmi {} pur {} total loss {:.6}",
        out.display(),
        fmt(r.acc),
        fmt(r.nmi),
        fmt(r.pur),
        r.losses.total
    );
}

fn evaluate_typed<T: Real>(ck: &crate::checkpoint::Checkpoint, data: &MultiViewDataset) -> Result<MetricsReport> {
    let model = ck.model::<T>();
    Ok(evaluate(&model, data, &ck.train)?.1)
}

/// Scores a checkpoint on the config's dataset and writes the report and
/// coupling CSVs into `out`.
pub fn cmd_evaluate(checkpoint: &Path, cfg: &RunConfig, out: &Path) -> Result<MetricsReport> {
    let ck = load_checkpoint(checkpoint)?;
    let data = cfg.load_dataset()?;
    let specs = &ck.weights.specs;
    let dims = data.dims();
    if specs.len() != dims.len() {
        return Err(BdclError::Compatibility(format!(
            "checkpoint has {} views, dataset has {}",
            specs.len(),
            dims.len()
        )));
    }
    for (v, (s, &d)) in specs.iter().zip(&dims).enumerate() {
        if s.input_dim != d {
            return Err(BdclError::Compatibility(format!(
                "view {v}: checkpoint expects dim {}, dataset has {d}",
                s.input_dim
            )));
        }
    }
    if data.k != ck.weights.clusters {
        return Err(BdclError::Compatibility(format!(
            "checkpoint has {} clusters, dataset declares {}",
            ck.weights.clusters, data.k
        )));
    }
    let report = match ck.precision.as_str() {
        "f32" => evaluate_typed::<f32>(&ck, &data)?,
        _ => evaluate_typed::<f64>(&ck, &data)?,
    };
    create_dir(out)?;
    write_report(&report, out)?;
    print_summary(out, &report);
    Ok(report)
}

fn train_config(args: &TrainArgs) -> Result<RunConfig> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.train.seed = s;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    let a = &mut cfg.train.ablation;
    a.no_fd |= args.no_fd || args.no_bd;
    a.no_cd |= args.no_cd || args.no_bd;
    a.no_cc |= args.no_cc;
    if let Some(e) = args.pretrain_epochs {
        cfg.train.pretrain_epochs = e;
    }
    if let Some(e) = args.cluster_epochs {
        cfg.train.cluster_epochs = e;
    }
    Ok(cfg)
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => {
            let mut cfg = load_config(args.config.as_deref())?;
            if let (Some(seed), DatasetSource::Synthetic(spec)) = (args.seed, &mut cfg.dataset) {
                spec.seed = seed;
            }
            let out = args.out.unwrap_or_else(|| cfg.out_dir.join("data"));
            cmd_generate(&cfg, &out)?;
        }
        Command::Train(args) => {
            let cfg = train_config(&args)?;
            match &args.seeds {
                Some(seeds) => {
                    for &s in seeds {
                        let mut run = cfg.clone();
                        run.train.seed = s;
                        run.out_dir = cfg.out_dir.join(format!("seed_{s}"));
                        cmd_train(&run)?;
                    }
                }
                None => {
                    cmd_train(&cfg)?;
                }
            }
        }
        Command::Evaluate(args) => {
            let dir = args.checkpoint.parent().map(Path::to_path_buf).unwrap_or_default();
            let cfg_path = args.config.clone().or_else(|| {
                let p = dir.join(RESOLVED_CONFIG);
                p.exists().then_some(p)
            });
            let mut cfg = load_config(cfg_path.as_deref())?;
            if let Some(m) = args.dataset {
                cfg.dataset = DatasetSource::Manifest { path: m };
            }
            let out = args.out.unwrap_or(dir);
            cmd_evaluate(&args.checkpoint, &cfg, &out)?;
        }
    }
    std::io::stdout().flush().ok();
    Ok(())
}
