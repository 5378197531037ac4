//! Training loop, metric logging, checkpointing with exact resume, and
//! synchronous data-parallel gradient combination.

mod checkpoint;
mod metric_log;
mod parallel;

use std::path::{Path, PathBuf};

use log::info;
use thiserror::Error;

use crate::config::{dump_effective_config, parse_config, ConfigError, ExperimentConfig};
use crate::data::{augment, batch_indices, load_dataset, seeded_rng, DataError, Manifest};
use crate::models::{build_module, build_optimizers, ModelError, SynthesisModule};
use crate::nn::{Optimizer, OptimizerKind};
use crate::tensor::{Tensor, TensorError};

pub use checkpoint::{Checkpoint, FORMAT_VERSION, MAGIC};
pub use metric_log::{log_metrics, parse_metric_log, read_metric_log, MetricLog, MetricRow, METRICS_HEADER};
pub use parallel::{data_parallel_step, data_parallel_step_with_shards, shard_sizes, sharded_phase_gradients};

pub const LAST_CHECKPOINT: &str = "last.gsyn";
pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error("checkpoint offset {offset}: {message}")]
    Checkpoint { offset: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("non-finite {metric} = {value} at epoch {epoch}, step {step}")]
    NonFinite { epoch: u64, step: u64, metric: String, value: f64 },
    #[error("training step failed at epoch {epoch}, step {step}: {message}")]
    Step { epoch: u64, step: u64, message: String },
    #[error("{0}")]
    Startup(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("checkpoint contents: {0}")]
    State(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl TrainerError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        TrainerError::Io { path: path.into(), source }
    }
}

impl From<TensorError> for TrainerError {
    fn from(e: TensorError) -> Self {
        TrainerError::Model(ModelError::Tensor(e))
    }
}

pub type Result<T> = std::result::Result<T, TrainerError>;

fn slot_names(kind: OptimizerKind) -> &'static [&'static str] {
    match kind {
        OptimizerKind::Sgd { .. } => &["velocity"],
        OptimizerKind::Adam { .. } => &["m", "v"],
    }
}

/// Snapshot of everything needed to continue training bit-for-bit.
pub fn capture_checkpoint(
    cfg: &ExperimentConfig,
    module: &dyn SynthesisModule,
    optimizers: &[Optimizer],
    epoch: u64,
    step: u64,
) -> Checkpoint {
    let mut tensors = Vec::new();
    for group in module.groups() {
        for p in &group.params {
            tensors.push((format!("param/{}/{}", group.name, p.name), p.value.clone()));
        }
    }
    for (group, opt) in module.groups().iter().zip(optimizers) {
        tensors.push((format!("opt/{}/step", group.name), Tensor::scalar(opt.step as f64)));
        for (slot, buffers) in slot_names(opt.kind).iter().zip(&opt.slots) {
            for (p, buf) in group.params.iter().zip(buffers) {
                tensors.push((format!("opt/{}/{slot}/{}", group.name, p.name), buf.clone()));
            }
        }
    }
    if let Some(s) = module.schedule() {
        tensors.push(("schedule/betas".into(), Tensor::from_vec(s.betas.clone())));
    }
    Checkpoint {
        epoch,
        step,
        config_text: dump_effective_config(cfg),
        rng_states: vec![cfg.seed, step],
        tensors,
    }
}

fn take_tensor(ckpt: &Checkpoint, name: &str, like: &Tensor) -> Result<Tensor> {
    let t = ckpt.tensor(name).ok_or_else(|| TrainerError::State(format!("missing tensor '{name}'")))?;
    if t.shape() != like.shape() {
        return Err(TrainerError::State(format!("'{name}' has shape {:?}, expected {:?}", t.shape(), like.shape())));
    }
    Ok(t.clone())
}

/// A module, its optimizers and the embedded config rebuilt from a checkpoint.
pub struct RestoredState {
    pub config: ExperimentConfig,
    pub module: Box<dyn SynthesisModule>,
    pub optimizers: Vec<Optimizer>,
}

pub fn restore_checkpoint(ckpt: &Checkpoint) -> Result<RestoredState> {
    let config = parse_config(&ckpt.config_text)?;
    if ckpt.rng_states != [config.seed, ckpt.step] {
        return Err(TrainerError::State(format!("rng states {:?} disagree with seed and step", ckpt.rng_states)));
    }
    let mut module = build_module(&config)?;
    let mut optimizers = build_optimizers(module.as_ref(), &config);
    if let Some(s) = module.schedule() {
        let stored = ckpt.tensor("schedule/betas").ok_or_else(|| TrainerError::State("missing schedule/betas".into()))?;
        if stored.data() != s.betas.as_slice() {
            return Err(TrainerError::State("stored noise schedule differs from the embedded config".into()));
        }
    }
    for (group, opt) in module.groups_mut().iter_mut().zip(&mut optimizers) {
        for p in &mut group.params {
            p.value = take_tensor(ckpt, &format!("param/{}/{}", group.name, p.name), &p.value)?;
        }
        let step = take_tensor(ckpt, &format!("opt/{}/step", group.name), &Tensor::scalar(0.0))?.item()?;
        opt.step = step as u64;
        for (slot, buffers) in slot_names(opt.kind).iter().zip(&mut opt.slots) {
            for (p, buf) in group.params.iter().zip(buffers.iter_mut()) {
                *buf = take_tensor(ckpt, &format!("opt/{}/{slot}/{}", group.name, p.name), buf)?;
            }
        }
    }
    Ok(RestoredState { config, module, optimizers })
}

/// Loads a checkpoint file and rebuilds its module.
pub fn load_checkpoint_module(path: &Path) -> Result<(Checkpoint, RestoredState)> {
    let ckpt = Checkpoint::load(path)?;
    let state = restore_checkpoint(&ckpt)?;
    Ok((ckpt, state))
}

/// Result of [`train_run`].
pub struct RunOutcome {
    pub checkpoint: Checkpoint,
    pub checkpoint_path: PathBuf,
    pub metrics: Vec<MetricRow>,
    pub module: Box<dyn SynthesisModule>,
}

fn ensure_compatible(supplied: &ExperimentConfig, stored: &ExperimentConfig) -> Result<()> {
    let mut a = supplied.clone();
    a.epochs = stored.epochs;
    if &a == stored {
        return Ok(());
    }
    let (da, db) = (dump_effective_config(&a), dump_effective_config(stored));
    let diff: Vec<String> = da
        .lines()
        .zip(db.lines())
        .filter(|(x, y)| x != y)
        .map(|(x, y)| format!("'{}' vs checkpoint '{}'", x.trim(), y.trim()))
        .collect();
    Err(TrainerError::Startup(format!(
        "config does not match the checkpoint being resumed (only epochs may change): {}",
        diff.join("; ")
    )))
}

/// Runs (or resumes) training as configured, writing checkpoints and
/// `metrics.csv` under `out_dir`. `epochs = 0` only records the initial state.
pub fn train_run(
    cfg: &ExperimentConfig,
    manifest: &Manifest,
    data_root: &Path,
    out_dir: &Path,
    resume: bool,
) -> Result<RunOutcome> {
    std::fs::create_dir_all(out_dir).map_err(|e| TrainerError::io(out_dir, e))?;
    let last_path = out_dir.join(LAST_CHECKPOINT);
    let metrics_path = out_dir.join(METRICS_FILE);

    let (mut module, mut optimizers, start_epoch, mut step, mut log) = if resume {
        if !last_path.exists() {
            return Err(TrainerError::Startup(format!(
                "resume requested but no checkpoint at {}",
                last_path.display()
            )));
        }
        let (ckpt, state) = load_checkpoint_module(&last_path)?;
        ensure_compatible(cfg, &state.config)?;
        info!("resuming from {} at epoch {}, step {}", last_path.display(), ckpt.epoch, ckpt.step);
        let log = MetricLog::resume(&metrics_path, ckpt.epoch)?;
        (state.module, state.optimizers, ckpt.epoch, ckpt.step, log)
    } else {
        cfg.check()?;
        let module = build_module(cfg)?;
        let optimizers = build_optimizers(module.as_ref(), cfg);
        (module, optimizers, 0, 0, MetricLog::create(&metrics_path)?)
    };

    let dataset = load_dataset(manifest, data_root, cfg)?;
    let schedule = cfg.scheduler.schedule();
    let metric = module.primary_metric();

    for e in start_epoch..cfg.epochs as u64 {
        let lr = schedule.lr_at(cfg.optimizer.lr, e as usize);
        let mut total = 0.0;
        let batches = batch_indices(dataset.len(), cfg.batch_size, e, cfg.seed);
        let n_batches = batches.len();
        for idx in batches {
            let mut batch = dataset.gather(&idx);
            let mut rng = seeded_rng(cfg.seed, e, step + 1);
            augment(&mut batch, &cfg.augmentation, cfg.normalization_range, &mut rng);
            let workers = cfg.workers.min(batch.len());
            let report = data_parallel_step(module.as_mut(), &mut optimizers, &batch, workers, lr, &mut rng)
                .map_err(|err| match err {
                    TrainerError::Model(m) => TrainerError::Step { epoch: e + 1, step: step + 1, message: m.to_string() },
                    other => other,
                })?;
            step += 1;
            log_metrics(&mut log, e + 1, step, &report)?;
            total += report.get(metric).unwrap_or(0.0);
        }
        info!("epoch {}/{}: mean {metric} {:.6} (lr {lr:e})", e + 1, cfg.epochs, total / n_batches as f64);

        let ckpt = capture_checkpoint(cfg, module.as_ref(), &optimizers, e + 1, step);
        if cfg.checkpoint_every > 0 && (e + 1) % cfg.checkpoint_every as u64 == 0 {
            ckpt.save(&out_dir.join(format!("checkpoint_epoch_{:04}.gsyn", e + 1)))?;
        }
        ckpt.save(&last_path)?;
    }

    let final_epoch = start_epoch.max(cfg.epochs as u64);
    let checkpoint = capture_checkpoint(cfg, module.as_ref(), &optimizers, final_epoch, step);
    checkpoint.save(&last_path)?;
    Ok(RunOutcome { checkpoint, checkpoint_path: last_path, metrics: log.rows().to_vec(), module })
}
