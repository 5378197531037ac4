use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, ModelFamily};
use crate::data::Batch;
use crate::nn::{time_embedding, GroupBuilder, Layer, ParamGroup};
use crate::tensor::{Tape, Tensor, Var};

use super::losses::diffusion_loss;
use super::nets::LEAKY_SLOPE;
use super::schedule::{build_schedule, ddpm_sample_step, NoiseSchedule};
use super::{
    check_labels, clamp_range, conditioning_of, one_hot, standard_normal, Capabilities, Conditioning, PhaseOutput,
    Result, StepNoise, SynthesisModule,
};

pub const TIME_EMBEDDING_DIM: usize = 32;
const TIME_HIDDEN: usize = 64;

/// Three-level ε-prediction network with additive skips, trained and sampled
/// as a DDPM.
pub struct Diffusion {
    groups: Vec<ParamGroup>,
    time_in: Layer,
    class_in: Option<Layer>,
    /// Per-block projections of the time/class hidden vector to channel biases.
    time_bias: [Layer; 6],
    input: Layer,
    down1: Layer,
    down2: Layer,
    mid: Layer,
    up2: Layer,
    up1: Layer,
    output: Layer,
    schedule: NoiseSchedule,
    conditioning: Conditioning,
    shape: [usize; 3],
}

impl Diffusion {
    pub fn new(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        let d = &cfg.diffusion;
        let schedule = build_schedule(d.timesteps, d.beta_start, d.beta_end)?;
        let conditioning = conditioning_of(cfg);
        let (c, c1) = (cfg.channels, cfg.base_channels);
        let c2 = 2 * c1;
        let mut b = GroupBuilder::new("denoiser", rng).kaiming_convs();
        let time_in = b.dense("time.embed", TIME_EMBEDDING_DIM, TIME_HIDDEN);
        let class_in = match conditioning {
            Conditioning::Class { num_classes } => Some(b.dense("class.embed", num_classes, TIME_HIDDEN)),
            Conditioning::None => None,
        };
        let bias_widths = [c1, c2, c2, c2, c2, c1];
        let names = ["input", "down1", "down2", "mid", "up2", "up1"];
        let time_bias = std::array::from_fn(|i| b.dense(&format!("time.{}", names[i]), TIME_HIDDEN, bias_widths[i]));
        let input = b.conv2d("input", c, c1, 3, 1, 1);
        let down1 = b.conv2d("down1", c1, c2, 4, 2, 1);
        let down2 = b.conv2d("down2", c2, c2, 4, 2, 1);
        let mid = b.conv2d("mid", c2, c2, 3, 1, 1);
        let up2 = b.conv_transpose2d("up2", c2, c2, 4, 2, 1);
        let up1 = b.conv_transpose2d("up1", c2, c1, 4, 2, 1);
        let output = b.conv2d("output", c1, c, 3, 1, 1);
        // ε̂ starts at 0, i.e. at unit loss
        b.zero_weights(&output);
        Ok(Diffusion {
            groups: vec![b.finish()],
            time_in,
            class_in,
            time_bias,
            input,
            down1,
            down2,
            mid,
            up2,
            up1,
            output,
            schedule,
            conditioning,
            shape: cfg.image_shape(),
        })
    }

    /// ε̂(x_t, t, label).
    pub fn predict_noise<'t>(
        &self,
        x_t: Var<'t>,
        steps: &[usize],
        labels: Option<(&[usize], usize)>,
        params: &[Var<'t>],
    ) -> Result<Var<'t>> {
        let tape = x_t.tape();
        let mut emb = Vec::with_capacity(steps.len() * TIME_EMBEDDING_DIM);
        for &t in steps {
            emb.extend_from_slice(time_embedding(t, TIME_EMBEDDING_DIM)?.data());
        }
        let emb = tape.constant(Tensor::new(vec![steps.len(), TIME_EMBEDDING_DIM], emb)?);
        let mut hidden = self.time_in.forward(emb, params)?;
        if let (Some(layer), Some((l, k))) = (&self.class_in, labels) {
            hidden = hidden.add(layer.forward(tape.constant(one_hot(l, k)?), params)?)?;
        }
        let hidden = hidden.leaky_relu(LEAKY_SLOPE);
        let block = |layer: &Layer, x: Var<'t>, bias: usize, skip: Option<Var<'t>>| -> Result<Var<'t>> {
            let mut h = layer.forward(x, params)?;
            if let Some(s) = skip {
                h = h.add(s)?;
            }
            let tb = self.time_bias[bias].forward(hidden, params)?;
            Ok(h.channel_bias(tb)?.leaky_relu(LEAKY_SLOPE))
        };
        let h1 = block(&self.input, x_t, 0, None)?;
        let h2 = block(&self.down1, h1, 1, None)?;
        let h3 = block(&self.down2, h2, 2, None)?;
        let m = block(&self.mid, h3, 3, Some(h3))?;
        let u2 = block(&self.up2, m, 4, Some(h2))?;
        let u1 = block(&self.up1, u2, 5, Some(h1))?;
        Ok(self.output.forward(u1, params)?)
    }

    /// Per-row forward corruption with row-specific timesteps.
    fn corrupt(&self, x0: &Tensor, eps: &Tensor, steps: &[usize]) -> Result<Tensor> {
        let row = x0.row_len();
        let mut data = Vec::with_capacity(x0.numel());
        for ((x, e), &t) in x0.data().chunks(row).zip(eps.data().chunks(row)).zip(steps) {
            let ab = self.schedule.alpha_bar(t)?;
            let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
            data.extend(x.iter().zip(e).map(|(x, e)| a * x + b * e));
        }
        Ok(Tensor::new(x0.shape().to_vec(), data)?)
    }
}

impl SynthesisModule for Diffusion {
    fn family(&self) -> ModelFamily {
        ModelFamily::Diffusion
    }

    fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    fn groups_mut(&mut self) -> &mut [ParamGroup] {
        &mut self.groups
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { can_reconstruct: false, needs_iterative_sampling: true }
    }

    fn conditioning(&self) -> Conditioning {
        self.conditioning
    }

    fn image_shape(&self) -> [usize; 3] {
        self.shape
    }

    fn primary_metric(&self) -> &'static str {
        "diffusion_mse"
    }

    fn draw_noise(&self, _phase: usize, n: usize, rng: &mut ChaCha8Rng) -> StepNoise {
        let [c, h, w] = self.shape;
        let steps = (0..n).map(|_| rng.random_range(1..=self.schedule.timesteps())).collect();
        StepNoise { tensors: vec![standard_normal(&[n, c, h, w], rng)], steps }
    }

    fn phase_gradients(&self, _phase: usize, batch: &Batch, noise: &StepNoise) -> Result<PhaseOutput> {
        let labels = check_labels(self.conditioning, batch.labels.as_deref(), batch.len())?;
        let eps = &noise.tensors[0];
        let x_t = self.corrupt(&batch.images, eps, &noise.steps)?;
        let tape = Tape::new();
        let params = self.groups[0].bind(&tape, true);
        let eps_hat = self.predict_noise(tape.constant(x_t), &noise.steps, labels, &params)?;
        let loss = diffusion_loss(eps_hat, tape.constant(eps.clone()))?;
        let grads = tape.backward(loss)?;
        Ok(PhaseOutput {
            grads: params.iter().map(|p| grads.wrt(*p)).collect(),
            metrics: vec![("diffusion_mse".into(), loss.item()?)],
        })
    }

    fn generate(&self, n: usize, labels: Option<&[usize]>, range: (f64, f64), rng: &mut ChaCha8Rng) -> Result<Tensor> {
        let labels = check_labels(self.conditioning, labels, n)?;
        let [c, h, w] = self.shape;
        if n == 0 {
            return Ok(Tensor::zeros(&[0, c, h, w]));
        }
        let mut x = standard_normal(&[n, c, h, w], rng);
        for t in (1..=self.schedule.timesteps()).rev() {
            let tape = Tape::new();
            let params = self.groups[0].bind(&tape, false);
            let eps_hat = self.predict_noise(tape.constant(x.clone()), &vec![t; n], labels, &params)?.value();
            x = ddpm_sample_step(&x, t, &eps_hat, &self.schedule, rng)?;
        }
        Ok(clamp_range(x, range))
    }

    fn schedule(&self) -> Option<&NoiseSchedule> {
        Some(&self.schedule)
    }
}
