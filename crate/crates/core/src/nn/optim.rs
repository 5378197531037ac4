use crate::tensor::{Result, Tensor, TensorError};

use super::ParamGroup;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam_default() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    fn slot_count(&self) -> usize {
        match self {
            OptimizerKind::Sgd { .. } => 1,
            OptimizerKind::Adam { .. } => 2,
        }
    }
}

/// Per-group optimizer: slot buffers mirror the parameter shapes.
///
/// SGD keeps one velocity slot per parameter; Adam keeps first and second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    /// Global-norm gradient clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub step: u64,
    pub slots: Vec<Vec<Tensor>>,
}

fn check_finite(grad: &Tensor) -> Result<()> {
    if grad.is_finite() {
        Ok(())
    } else {
        Err(TensorError::Numeric("non-finite gradient".into()))
    }
}

fn check_shapes(p: &Tensor, g: &Tensor) -> Result<()> {
    if p.shape() == g.shape() {
        Ok(())
    } else {
        Err(TensorError::dim("optimizer", format!("parameter {:?} vs gradient {:?}", p.shape(), g.shape())))
    }
}

/// v ← momentum·v + g; p ← p − lr·v
pub fn sgd_step(p: &mut Tensor, grad: &Tensor, velocity: &mut Tensor, lr: f64, momentum: f64) -> Result<()> {
    check_shapes(p, grad)?;
    check_finite(grad)?;
    for ((pv, &g), v) in p.data_mut().iter_mut().zip(grad.data()).zip(velocity.data_mut()) {
        *v = momentum * *v + g;
        *pv -= lr * *v;
    }
    Ok(())
}

/// Bias-corrected Adam update for step `t` (1-based).
#[allow(clippy::too_many_arguments)]
pub fn adam_step(
    p: &mut Tensor,
    grad: &Tensor,
    m: &mut Tensor,
    v: &mut Tensor,
    t: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<()> {
    check_shapes(p, grad)?;
    check_finite(grad)?;
    if t == 0 {
        return Err(TensorError::arg("adam_step", "step counter starts at 1"));
    }
    let c1 = 1.0 - beta1.powi(t as i32);
    let c2 = 1.0 - beta2.powi(t as i32);
    for (((pv, &g), mv), vv) in p.data_mut().iter_mut().zip(grad.data()).zip(m.data_mut()).zip(v.data_mut()) {
        *mv = beta1 * *mv + (1.0 - beta1) * g;
        *vv = beta2 * *vv + (1.0 - beta2) * g * g;
        let m_hat = *mv / c1;
        let v_hat = *vv / c2;
        *pv -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, clip_norm: Option<f64>, group: &ParamGroup) -> Self {
        let slots = (0..kind.slot_count())
            .map(|_| group.params.iter().map(|p| Tensor::zeros(p.value.shape())).collect())
            .collect();
        Optimizer { kind, clip_norm, step: 0, slots }
    }

    /// Applies one update to `group`. Nothing is modified if any gradient is
    /// non-finite or mis-shaped.
    pub fn apply(&mut self, group: &mut ParamGroup, grads: &[Tensor], lr: f64) -> Result<()> {
        if grads.len() != group.params.len() {
            return Err(TensorError::arg(
                "optimizer",
                format!("{} gradients for {} parameters", grads.len(), group.params.len()),
            ));
        }
        for (p, g) in group.params.iter().zip(grads) {
            check_shapes(&p.value, g)?;
            check_finite(g)?;
        }
        let clipped;
        let grads = match self.clip_norm {
            Some(max) => {
                let norm = grads.iter().flat_map(|g| g.data()).map(|v| v * v).sum::<f64>().sqrt();
                if norm > max {
                    let s = max / norm;
                    clipped = grads.iter().map(|g| g.map(|v| v * s)).collect::<Vec<_>>();
                    &clipped[..]
                } else {
                    grads
                }
            }
            None => grads,
        };
        self.step += 1;
        for (i, (p, g)) in group.params.iter_mut().zip(grads).enumerate() {
            match self.kind {
                OptimizerKind::Sgd { momentum } => sgd_step(&mut p.value, g, &mut self.slots[0][i], lr, momentum)?,
                OptimizerKind::Adam { beta1, beta2, eps } => {
                    let (first, second) = self.slots.split_at_mut(1);
                    adam_step(&mut p.value, g, &mut first[0][i], &mut second[0][i], self.step, lr, beta1, beta2, eps)?
                }
            }
        }
        Ok(())
    }
}
