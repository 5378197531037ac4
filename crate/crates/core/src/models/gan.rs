use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, ModelFamily};
use crate::data::Batch;
use crate::nn::{GroupBuilder, Layer, ParamGroup};
use crate::tensor::{Tape, Tensor, Var};

use super::losses::{discriminator_loss, generator_loss};
use super::nets::{down_levels, ImageDecoder, ImageEncoder};
use super::{
    check_labels, clamp_range, conditioning_of, label_planes, one_hot, standard_normal, Capabilities, Conditioning,
    PhaseOutput, Result, StepNoise, SynthesisModule,
};

const GENERATOR: usize = 0;
const DISCRIMINATOR: usize = 1;

/// DCGAN-style generator/discriminator pair trained with the non-saturating loss.
pub struct Gan {
    groups: Vec<ParamGroup>,
    generator: ImageDecoder,
    features: ImageEncoder,
    head: Layer,
    latent_dim: usize,
    label_smoothing: bool,
    conditioning: Conditioning,
    shape: [usize; 3],
}

type Labels<'a> = Option<(&'a [usize], usize)>;

impl Gan {
    pub fn new(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        let conditioning = conditioning_of(cfg);
        let extra = match conditioning {
            Conditioning::Class { num_classes } => num_classes,
            Conditioning::None => 0,
        };
        let levels = down_levels(cfg.image_size);
        let mut g = GroupBuilder::new("generator", rng);
        let generator = ImageDecoder::new(&mut g, "generator", cfg.latent_dim + extra, cfg.base_channels, levels, cfg.channels);
        let generator_group = g.finish();
        let mut d = GroupBuilder::new("discriminator", rng);
        let features = ImageEncoder::new(&mut d, "discriminator", cfg.channels + extra, cfg.base_channels, levels);
        let head = d.dense("discriminator.head", features.features, 1);
        Ok(Gan {
            groups: vec![generator_group, d.finish()],
            generator,
            features,
            head,
            latent_dim: cfg.latent_dim,
            label_smoothing: cfg.gan.label_smoothing,
            conditioning,
            shape: cfg.image_shape(),
        })
    }

    fn generate_images<'t>(&self, z: Var<'t>, labels: Labels<'_>, params: &[Var<'t>]) -> Result<Var<'t>> {
        let tape = z.tape();
        let z = match labels {
            Some((l, k)) => tape.concat(&[z, tape.constant(one_hot(l, k)?)], 1)?,
            None => z,
        };
        Ok(self.generator.forward(z, params)?)
    }

    /// D(x) ∈ (0, 1), shape `[N, 1]`.
    fn discriminate<'t>(&self, x: Var<'t>, labels: Labels<'_>, params: &[Var<'t>]) -> Result<Var<'t>> {
        let tape = x.tape();
        let x = match labels {
            Some((l, k)) => {
                let s = x.shape();
                tape.concat(&[x, tape.constant(label_planes(l, k, s[2], s[3])?)], 1)?
            }
            None => x,
        };
        let h = self.features.forward(x, params)?;
        Ok(self.head.forward(h, params)?.sigmoid())
    }
}

impl SynthesisModule for Gan {
    fn family(&self) -> ModelFamily {
        ModelFamily::Gan
    }

    fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    fn groups_mut(&mut self) -> &mut [ParamGroup] {
        &mut self.groups
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { can_reconstruct: false, needs_iterative_sampling: false }
    }

    fn conditioning(&self) -> Conditioning {
        self.conditioning
    }

    fn image_shape(&self) -> [usize; 3] {
        self.shape
    }

    /// Discriminator first, then generator.
    fn phases(&self) -> usize {
        2
    }

    fn phase_group(&self, phase: usize) -> usize {
        if phase == 0 {
            DISCRIMINATOR
        } else {
            GENERATOR
        }
    }

    fn primary_metric(&self) -> &'static str {
        "g_loss"
    }

    fn draw_noise(&self, _phase: usize, n: usize, rng: &mut ChaCha8Rng) -> StepNoise {
        StepNoise { tensors: vec![standard_normal(&[n, self.latent_dim], rng)], steps: vec![] }
    }

    fn phase_gradients(&self, phase: usize, batch: &Batch, noise: &StepNoise) -> Result<PhaseOutput> {
        let labels = check_labels(self.conditioning, batch.labels.as_deref(), batch.len())?;
        let tape = Tape::new();
        let train_d = phase == 0;
        let g_params = self.groups[GENERATOR].bind(&tape, !train_d);
        let d_params = self.groups[DISCRIMINATOR].bind(&tape, train_d);
        let fake = self.generate_images(tape.constant(noise.tensors[0].clone()), labels, &g_params)?;
        let d_fake = self.discriminate(fake, labels, &d_params)?;
        if train_d {
            let d_real = self.discriminate(tape.constant(batch.images.clone()), labels, &d_params)?;
            let loss = discriminator_loss(d_real, d_fake, self.label_smoothing)?;
            let grads = tape.backward(loss)?;
            Ok(PhaseOutput {
                grads: d_params.iter().map(|p| grads.wrt(*p)).collect(),
                metrics: vec![
                    ("d_loss".into(), loss.item()?),
                    ("d_real".into(), d_real.mean()?.item()?),
                    ("d_fake".into(), d_fake.mean()?.item()?),
                ],
            })
        } else {
            let loss = generator_loss(d_fake)?;
            let grads = tape.backward(loss)?;
            Ok(PhaseOutput {
                grads: g_params.iter().map(|p| grads.wrt(*p)).collect(),
                metrics: vec![("g_loss".into(), loss.item()?)],
            })
        }
    }

    fn generate(&self, n: usize, labels: Option<&[usize]>, range: (f64, f64), rng: &mut ChaCha8Rng) -> Result<Tensor> {
        let labels = check_labels(self.conditioning, labels, n)?;
        let [c, h, w] = self.shape;
        if n == 0 {
            return Ok(Tensor::zeros(&[0, c, h, w]));
        }
        let tape = Tape::new();
        let params = self.groups[GENERATOR].bind(&tape, false);
        let z = tape.constant(standard_normal(&[n, self.latent_dim], rng));
        Ok(clamp_range(self.generate_images(z, labels, &params)?.value(), range))
    }
}
