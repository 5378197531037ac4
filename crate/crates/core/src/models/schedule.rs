use rand_chacha::ChaCha8Rng;

use crate::tensor::Tensor;

use super::{standard_normal, ModelError, Result};

/// Linear β schedule and derived quantities; index `t − 1` holds step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub alpha_bars: Vec<f64>,
    /// β̃_t = (1 − ᾱ_{t−1}) / (1 − ᾱ_t) · β_t with ᾱ_0 = 1.
    pub posterior_variance: Vec<f64>,
}

impl NoiseSchedule {
    /// Rebuilds the derived vectors from explicit β values.
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.len() < 2 || betas.iter().any(|b| !(*b > 0.0 && *b < 1.0)) {
            return Err(ModelError::Config("noise schedule needs T ≥ 2 and every β in (0, 1)".into()));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(betas.len());
        let mut acc = 1.0;
        for a in &alphas {
            acc *= a;
            alpha_bars.push(acc);
        }
        let posterior_variance = (0..betas.len())
            .map(|i| {
                let prev = if i == 0 { 1.0 } else { alpha_bars[i - 1] };
                (1.0 - prev) / (1.0 - alpha_bars[i]) * betas[i]
            })
            .collect();
        Ok(NoiseSchedule { betas, alphas, alpha_bars, posterior_variance })
    }

    pub fn timesteps(&self) -> usize {
        self.betas.len()
    }

    fn index(&self, t: usize) -> Result<usize> {
        if t == 0 || t > self.timesteps() {
            return Err(ModelError::Argument(format!("timestep {t} outside [1, {}]", self.timesteps())));
        }
        Ok(t - 1)
    }

    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        Ok(self.alpha_bars[self.index(t)?])
    }
}

/// β_t = β_start + (t−1)/(T−1)·(β_end − β_start).
pub fn build_schedule(timesteps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if timesteps < 2 || !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(ModelError::Config(format!(
            "schedule needs T ≥ 2 and 0 < β_start ≤ β_end < 1 (got T={timesteps}, β=({beta_start}, {beta_end}))"
        )));
    }
    let span = (timesteps - 1) as f64;
    // lerp in this form hits both endpoints exactly
    let betas = (0..timesteps)
        .map(|i| {
            let f = i as f64 / span;
            beta_start * (1.0 - f) + beta_end * f
        })
        .collect();
    NoiseSchedule::from_betas(betas)
}

/// x_t = √ᾱ_t·x0 + √(1−ᾱ_t)·ε.
pub fn q_sample(x0: &Tensor, t: usize, eps: &Tensor, schedule: &NoiseSchedule) -> Result<Tensor> {
    if x0.shape() != eps.shape() {
        return Err(ModelError::Argument(format!("q_sample: x0 {:?} vs ε {:?}", x0.shape(), eps.shape())));
    }
    let ab = schedule.alpha_bar(t)?;
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    let data = x0.data().iter().zip(eps.data()).map(|(x, e)| a * x + b * e).collect();
    Ok(Tensor::new(x0.shape().to_vec(), data)?)
}

/// One ancestral step x_t → x_{t−1}; no noise is added at t = 1.
pub fn ddpm_sample_step(
    x_t: &Tensor,
    t: usize,
    eps_hat: &Tensor,
    schedule: &NoiseSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<Tensor> {
    if x_t.shape() != eps_hat.shape() {
        return Err(ModelError::Argument(format!("ddpm step: x_t {:?} vs ε̂ {:?}", x_t.shape(), eps_hat.shape())));
    }
    let i = schedule.index(t)?;
    let (beta, alpha, ab) = (schedule.betas[i], schedule.alphas[i], schedule.alpha_bars[i]);
    let coef = beta / (1.0 - ab).sqrt();
    let inv_sqrt_alpha = 1.0 / alpha.sqrt();
    let mut data: Vec<f64> =
        x_t.data().iter().zip(eps_hat.data()).map(|(x, e)| (x - coef * e) * inv_sqrt_alpha).collect();
    if t > 1 {
        let sigma = schedule.posterior_variance[i].sqrt();
        let z = standard_normal(x_t.shape(), rng);
        data.iter_mut().zip(z.data()).for_each(|(v, z)| *v += sigma * z);
    }
    Ok(Tensor::new(x_t.shape().to_vec(), data)?)
}
