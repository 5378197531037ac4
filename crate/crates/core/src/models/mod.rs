//! The synthesis abstraction and its three family implementations.

mod autoencoder;
mod diffusion;
mod gan;
mod losses;
mod nets;
mod schedule;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::config::{ExperimentConfig, ModelFamily};
use crate::data::{seeded_rng, Batch};
use crate::nn::{Optimizer, ParamGroup};
use crate::tensor::{Tensor, TensorError};

pub use autoencoder::Autoencoder;
pub use diffusion::{Diffusion, TIME_EMBEDDING_DIM};
pub use gan::Gan;
pub use losses::{
    diffusion_loss, discriminator_loss, generator_loss, kl_divergence, kl_term, reconstruction_loss, reparameterize,
    reparameterize_with, LOG_EPS, LOGVAR_LIMIT,
};
pub use schedule::{build_schedule, ddpm_sample_step, q_sample, NoiseSchedule};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("unsupported operation: {0}")]
    Capability(String),
    #[error("configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    None,
    Class { num_classes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub can_reconstruct: bool,
    pub needs_iterative_sampling: bool,
}

/// Randomness consumed by one training phase, drawn for the whole batch so
/// that any row split sees exactly the same values.
#[derive(Debug, Clone, PartialEq)]
pub struct StepNoise {
    /// Tensors whose leading axis is the batch axis.
    pub tensors: Vec<Tensor>,
    /// Per-item integer draws (diffusion timesteps).
    pub steps: Vec<usize>,
}

impl StepNoise {
    pub fn slice(&self, start: usize, end: usize) -> StepNoise {
        StepNoise {
            tensors: self.tensors.iter().map(|t| t.slice_rows(start, end).expect("noise covers batch")).collect(),
            steps: if self.steps.is_empty() { Vec::new() } else { self.steps[start..end].to_vec() },
        }
    }
}

/// Gradient for one parameter group plus the scalar metrics of that phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOutput {
    pub grads: Vec<Tensor>,
    pub metrics: Vec<(String, f64)>,
}

/// Named metrics of one training step and how many optimizer updates it made.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainStepReport {
    pub metrics: Vec<(String, f64)>,
    pub updates: usize,
}

impl TrainStepReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// One generative family. A training step is a sequence of phases; each phase
/// produces a gradient for exactly one parameter group, which is then updated
/// before the next phase runs.
pub trait SynthesisModule: Send + Sync {
    fn family(&self) -> ModelFamily;
    fn groups(&self) -> &[ParamGroup];
    fn groups_mut(&mut self) -> &mut [ParamGroup];
    fn capabilities(&self) -> Capabilities;
    fn conditioning(&self) -> Conditioning;
    /// `[C, H, W]` of generated samples.
    fn image_shape(&self) -> [usize; 3];

    fn phases(&self) -> usize {
        1
    }

    /// Index of the group updated in `phase`.
    fn phase_group(&self, phase: usize) -> usize {
        let _ = phase;
        0
    }

    /// Metric tracked as the training objective in logs and smoke checks.
    fn primary_metric(&self) -> &'static str;

    fn draw_noise(&self, phase: usize, n: usize, rng: &mut ChaCha8Rng) -> StepNoise;

    /// Mean-reduced loss gradient of `batch` for the phase's group.
    fn phase_gradients(&self, phase: usize, batch: &Batch, noise: &StepNoise) -> Result<PhaseOutput>;

    /// `n` samples `[n, C, H, W]` clamped to `range`.
    fn generate(&self, n: usize, labels: Option<&[usize]>, range: (f64, f64), rng: &mut ChaCha8Rng) -> Result<Tensor>;

    fn reconstruct(&self, batch: &Batch) -> Result<Tensor> {
        let _ = batch;
        Err(ModelError::Capability(format!("{} modules cannot reconstruct", self.family())))
    }

    /// Diffusion noise schedule, when the family has one.
    fn schedule(&self) -> Option<&NoiseSchedule> {
        None
    }
}

/// Builds the module for `cfg`, initialized from the config seed's init stream.
pub fn build_module(cfg: &ExperimentConfig) -> Result<Box<dyn SynthesisModule>> {
    cfg.check().map_err(|e| ModelError::Config(e.message))?;
    let mut rng = seeded_rng(cfg.seed, u64::MAX, 0);
    Ok(match cfg.model_family {
        ModelFamily::Autoencoder => Box::new(Autoencoder::new(cfg, &mut rng)?),
        ModelFamily::Gan => Box::new(Gan::new(cfg, &mut rng)?),
        ModelFamily::Diffusion => Box::new(Diffusion::new(cfg, &mut rng)?),
    })
}

/// Fresh optimizer state for each of the module's groups.
pub fn build_optimizers(module: &dyn SynthesisModule, cfg: &ExperimentConfig) -> Vec<Optimizer> {
    module
        .groups()
        .iter()
        .map(|g| Optimizer::new(cfg.optimizer.kind(), cfg.optimizer.clip_norm(), g))
        .collect()
}

/// Runs every phase serially on the full batch.
pub fn training_step(
    module: &mut dyn SynthesisModule,
    optimizers: &mut [Optimizer],
    batch: &Batch,
    lr: f64,
    rng: &mut ChaCha8Rng,
) -> Result<TrainStepReport> {
    let mut report = TrainStepReport::default();
    for phase in 0..module.phases() {
        let noise = module.draw_noise(phase, batch.len(), rng);
        let out = module.phase_gradients(phase, batch, &noise)?;
        let g = module.phase_group(phase);
        optimizers[g].apply(&mut module.groups_mut()[g], &out.grads, lr)?;
        report.metrics.extend(out.metrics);
        report.updates += 1;
    }
    Ok(report)
}

pub(crate) fn standard_normal(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let data = (0..shape.iter().product()).map(|_| StandardNormal.sample(rng)).collect();
    Tensor::new(shape.to_vec(), data).expect("sized from shape")
}

/// `[N, K]` one-hot rows.
pub fn one_hot(labels: &[usize], num_classes: usize) -> Result<Tensor> {
    let mut data = vec![0.0; labels.len() * num_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= num_classes {
            return Err(ModelError::Argument(format!("label {l} out of range [0, {num_classes})")));
        }
        data[i * num_classes + l] = 1.0;
    }
    Ok(Tensor::new(vec![labels.len(), num_classes], data)?)
}

/// `[N, K, H, W]` constant planes carrying the one-hot code.
pub fn label_planes(labels: &[usize], num_classes: usize, h: usize, w: usize) -> Result<Tensor> {
    let code = one_hot(labels, num_classes)?;
    let data = code.data().iter().flat_map(|&v| std::iter::repeat_n(v, h * w)).collect();
    Ok(Tensor::new(vec![labels.len(), num_classes, h, w], data)?)
}

/// Checks labels against the conditioning mode and returns them for class mode.
pub(crate) fn check_labels(
    conditioning: Conditioning,
    labels: Option<&[usize]>,
    n: usize,
) -> Result<Option<(&[usize], usize)>> {
    match (conditioning, labels) {
        (Conditioning::None, None) => Ok(None),
        (Conditioning::None, Some(_)) => {
            Err(ModelError::Argument("labels supplied to an unconditional module".into()))
        }
        (Conditioning::Class { .. }, None) => Err(ModelError::Argument("conditional module needs labels".into())),
        (Conditioning::Class { num_classes }, Some(l)) => {
            if l.len() != n {
                return Err(ModelError::Argument(format!("{} labels for {n} samples", l.len())));
            }
            if let Some(bad) = l.iter().find(|&&v| v >= num_classes) {
                return Err(ModelError::Argument(format!("label {bad} out of range [0, {num_classes})")));
            }
            Ok(Some((l, num_classes)))
        }
    }
}

pub(crate) fn clamp_range(x: Tensor, range: (f64, f64)) -> Tensor {
    x.map(|v| v.clamp(range.0, range.1))
}

pub(crate) fn conditioning_of(cfg: &ExperimentConfig) -> Conditioning {
    if cfg.is_conditional() {
        Conditioning::Class { num_classes: cfg.num_classes }
    } else {
        Conditioning::None
    }
}
