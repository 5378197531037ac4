use std::f64::consts::PI;

use crate::tensor::{Tensor, TensorError};

/// Learning rate as a pure function of the epoch index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrSchedule {
    Constant,
    /// lr₀·γ^⌊t/period⌋
    Step { gamma: f64, period: usize },
    /// Cosine annealing to `lr_min` over `t_max` epochs, then held at `lr_min`.
    Cosine { lr_min: f64, t_max: usize },
}

impl LrSchedule {
    pub fn lr_at(&self, base_lr: f64, epoch: usize) -> f64 {
        match *self {
            LrSchedule::Constant => base_lr,
            LrSchedule::Step { gamma, period } => base_lr * gamma.powi((epoch / period.max(1)) as i32),
            LrSchedule::Cosine { lr_min, t_max } => {
                if epoch >= t_max {
                    return lr_min;
                }
                let frac = epoch as f64 / t_max as f64;
                lr_min + 0.5 * (base_lr - lr_min) * (1.0 + (PI * frac).cos())
            }
        }
    }
}

/// Sinusoidal embedding of an integer step: [sin(t/ω₀), cos(t/ω₀), sin(t/ω₁), …]
/// with ωᵢ = 10000^(2i/d).
pub fn time_embedding(t: usize, dim: usize) -> Result<Tensor, TensorError> {
    if !dim.is_multiple_of(2) {
        return Err(TensorError::arg("time_embedding", format!("dimension {dim} must be even")));
    }
    let mut out = Vec::with_capacity(dim);
    for i in 0..dim / 2 {
        let freq = 10000f64.powf(2.0 * i as f64 / dim as f64);
        let angle = t as f64 / freq;
        out.push(angle.sin());
        out.push(angle.cos());
    }
    Ok(Tensor::from_vec(out))
}
