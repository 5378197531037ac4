use rand_chacha::ChaCha8Rng;

use crate::tensor::{Result, Tape, Tensor, TensorError, Var};

use super::standard_normal;

/// Floor (and 1 − ceiling) applied before every logarithm of a probability.
pub const LOG_EPS: f64 = 1e-7;
/// log-variances are clamped to ±this before exponentiation.
pub const LOGVAR_LIMIT: f64 = 10.0;

fn safe_log(p: Var<'_>) -> Result<Var<'_>> {
    p.clamp(LOG_EPS, 1.0 - LOG_EPS).log()
}

/// Batch mean of ½ Σ_dim (μ² + e^lv − lv − 1), lv clamped to ±[`LOGVAR_LIMIT`].
pub fn kl_term<'t>(mu: Var<'t>, logvar: Var<'t>) -> Result<Var<'t>> {
    let shape = mu.shape();
    if shape != logvar.shape() || shape.len() != 2 {
        return Err(TensorError::dim("kl_divergence", format!("mu {:?} vs logvar {:?}", shape, logvar.shape())));
    }
    let lv = logvar.clamp(-LOGVAR_LIMIT, LOGVAR_LIMIT);
    let per_dim = mu.square().add(lv.exp())?.sub(lv)?.add_scalar(-1.0);
    Ok(per_dim.sum_axes(&[1])?.mean()?.scale(0.5))
}

/// Closed-form KL(N(μ, e^lv) ‖ N(0, I)), averaged over the batch rows.
pub fn kl_divergence(mu: &Tensor, logvar: &Tensor) -> Result<f64> {
    if !mu.is_finite() || !logvar.is_finite() {
        return Err(TensorError::Numeric("kl_divergence: non-finite input".into()));
    }
    let tape = Tape::new();
    kl_term(tape.constant(mu.clone()), tape.constant(logvar.clone()))?.item()
}

/// z = μ + e^(lv/2)·ε with ε supplied; gradients reach μ and lv only.
pub fn reparameterize_with<'t>(mu: Var<'t>, logvar: Var<'t>, eps: &Tensor) -> Result<Var<'t>> {
    let eps = mu.tape().constant(eps.clone());
    let std = logvar.clamp(-LOGVAR_LIMIT, LOGVAR_LIMIT).scale(0.5).exp();
    mu.add(std.mul(eps)?)
}

pub fn reparameterize<'t>(mu: Var<'t>, logvar: Var<'t>, rng: &mut ChaCha8Rng) -> Result<Var<'t>> {
    let eps = standard_normal(&mu.shape(), rng);
    reparameterize_with(mu, logvar, &eps)
}

/// Mean squared error over every element.
pub fn reconstruction_loss<'t>(x_hat: Var<'t>, x: Var<'t>) -> Result<Var<'t>> {
    x_hat.sub(x)?.square().mean()
}

/// −mean[t·log D(x) + (1−t)·log(1−D(x))] − mean log(1 − D(G(z))), with the
/// real target t = 0.9 under one-sided label smoothing and 1 otherwise.
pub fn discriminator_loss<'t>(d_real: Var<'t>, d_fake: Var<'t>, label_smoothing: bool) -> Result<Var<'t>> {
    let target = if label_smoothing { 0.9 } else { 1.0 };
    let mut real = safe_log(d_real)?.scale(target);
    if label_smoothing {
        real = real.add(safe_log(d_real.neg().add_scalar(1.0))?.scale(1.0 - target))?;
    }
    let fake = safe_log(d_fake.neg().add_scalar(1.0))?;
    Ok(real.mean()?.add(fake.mean()?)?.neg())
}

/// Non-saturating generator loss −mean log D(G(z)).
pub fn generator_loss(d_fake: Var<'_>) -> Result<Var<'_>> {
    Ok(safe_log(d_fake)?.mean()?.neg())
}

/// mean (ε − ε̂)².
pub fn diffusion_loss<'t>(eps_hat: Var<'t>, eps: Var<'t>) -> Result<Var<'t>> {
    eps_hat.sub(eps)?.square().mean()
}
