use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, ModelFamily};
use crate::data::Batch;
use crate::nn::{GroupBuilder, Layer, ParamGroup};
use crate::tensor::{Tape, Tensor, Var};

use super::losses::{kl_term, reconstruction_loss, reparameterize_with};
use super::nets::{down_levels, ImageDecoder, ImageEncoder};
use super::{
    check_labels, clamp_range, conditioning_of, label_planes, one_hot, standard_normal, Capabilities, Conditioning,
    PhaseOutput, Result, StepNoise, SynthesisModule,
};

/// Convolutional (variational) autoencoder.
pub struct Autoencoder {
    groups: Vec<ParamGroup>,
    encoder: ImageEncoder,
    mu_head: Layer,
    logvar_head: Option<Layer>,
    decoder: ImageDecoder,
    latent_dim: usize,
    beta_kl: f64,
    conditioning: Conditioning,
    shape: [usize; 3],
}

impl Autoencoder {
    pub fn new(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        let conditioning = conditioning_of(cfg);
        let extra = match conditioning {
            Conditioning::Class { num_classes } => num_classes,
            Conditioning::None => 0,
        };
        let levels = down_levels(cfg.image_size);
        let mut b = GroupBuilder::new("autoencoder", rng).kaiming_convs();
        let encoder = ImageEncoder::new(&mut b, "encoder", cfg.channels + extra, cfg.base_channels, levels);
        let mu_head = b.dense("encoder.mu", encoder.features, cfg.latent_dim);
        let variational = cfg.autoencoder.variational;
        let logvar_head = variational.then(|| b.dense("encoder.logvar", encoder.features, cfg.latent_dim));
        let decoder = ImageDecoder::new(&mut b, "decoder", cfg.latent_dim + extra, cfg.base_channels, levels, cfg.channels);
        Ok(Autoencoder {
            groups: vec![b.finish()],
            encoder,
            mu_head,
            logvar_head,
            decoder,
            latent_dim: cfg.latent_dim,
            beta_kl: if variational { cfg.autoencoder.beta_kl } else { 0.0 },
            conditioning,
            shape: cfg.image_shape(),
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn is_variational(&self) -> bool {
        self.logvar_head.is_some()
    }

    /// Posterior mean and (for the variational model) log-variance.
    pub fn encode<'t>(
        &self,
        x: Var<'t>,
        labels: Option<(&[usize], usize)>,
        params: &[Var<'t>],
    ) -> Result<(Var<'t>, Option<Var<'t>>)> {
        let tape = x.tape();
        let x = match labels {
            Some((l, k)) => {
                let s = x.shape();
                tape.concat(&[x, tape.constant(label_planes(l, k, s[2], s[3])?)], 1)?
            }
            None => x,
        };
        let h = self.encoder.forward(x, params)?;
        let mu = self.mu_head.forward(h, params)?;
        let logvar = self.logvar_head.as_ref().map(|l| l.forward(h, params)).transpose()?;
        Ok((mu, logvar))
    }

    pub fn decode<'t>(&self, z: Var<'t>, labels: Option<(&[usize], usize)>, params: &[Var<'t>]) -> Result<Var<'t>> {
        let tape = z.tape();
        let z = match labels {
            Some((l, k)) => tape.concat(&[z, tape.constant(one_hot(l, k)?)], 1)?,
            None => z,
        };
        Ok(self.decoder.forward(z, params)?)
    }
}

impl SynthesisModule for Autoencoder {
    fn family(&self) -> ModelFamily {
        ModelFamily::Autoencoder
    }

    fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    fn groups_mut(&mut self) -> &mut [ParamGroup] {
        &mut self.groups
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { can_reconstruct: true, needs_iterative_sampling: false }
    }

    fn conditioning(&self) -> Conditioning {
        self.conditioning
    }

    fn image_shape(&self) -> [usize; 3] {
        self.shape
    }

    fn primary_metric(&self) -> &'static str {
        "loss"
    }

    fn draw_noise(&self, _phase: usize, n: usize, rng: &mut ChaCha8Rng) -> StepNoise {
        let tensors = if self.is_variational() { vec![standard_normal(&[n, self.latent_dim], rng)] } else { vec![] };
        StepNoise { tensors, steps: vec![] }
    }

    fn phase_gradients(&self, _phase: usize, batch: &Batch, noise: &StepNoise) -> Result<PhaseOutput> {
        let labels = check_labels(self.conditioning, batch.labels.as_deref(), batch.len())?;
        let tape = Tape::new();
        let params = self.groups[0].bind(&tape, true);
        let x = tape.constant(batch.images.clone());
        let (mu, logvar) = self.encode(x, labels, &params)?;
        let (z, kl) = match logvar {
            Some(lv) => (reparameterize_with(mu, lv, &noise.tensors[0])?, Some(kl_term(mu, lv)?)),
            None => (mu, None),
        };
        let x_hat = self.decode(z, labels, &params)?;
        let recon = reconstruction_loss(x_hat, x)?;
        let loss = match kl {
            Some(kl) => recon.add(kl.scale(self.beta_kl))?,
            None => recon,
        };
        let grads = tape.backward(loss)?;
        Ok(PhaseOutput {
            grads: params.iter().map(|p| grads.wrt(*p)).collect(),
            metrics: vec![
                ("loss".into(), loss.item()?),
                ("recon".into(), recon.item()?),
                ("kl".into(), kl.map(|k| k.item()).transpose()?.unwrap_or(0.0)),
            ],
        })
    }

    fn generate(&self, n: usize, labels: Option<&[usize]>, range: (f64, f64), rng: &mut ChaCha8Rng) -> Result<Tensor> {
        let labels = check_labels(self.conditioning, labels, n)?;
        let [c, h, w] = self.shape;
        if n == 0 {
            return Ok(Tensor::zeros(&[0, c, h, w]));
        }
        let tape = Tape::new();
        let params = self.groups[0].bind(&tape, false);
        let z = tape.constant(standard_normal(&[n, self.latent_dim], rng));
        Ok(clamp_range(self.decode(z, labels, &params)?.value(), range))
    }

    fn reconstruct(&self, batch: &Batch) -> Result<Tensor> {
        let labels = check_labels(self.conditioning, batch.labels.as_deref(), batch.len())?;
        let tape = Tape::new();
        let params = self.groups[0].bind(&tape, false);
        let (mu, _) = self.encode(tape.constant(batch.images.clone()), labels, &params)?;
        Ok(self.decode(mu, labels, &params)?.value())
    }
}
