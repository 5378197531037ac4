use rand_chacha::ChaCha8Rng;

use crate::data::Batch;
use crate::models::{training_step, PhaseOutput, StepNoise, SynthesisModule, TrainStepReport};
use crate::nn::Optimizer;
use crate::tensor::Tensor;

use super::{Result, TrainerError};

/// Contiguous shard sizes for `n` rows over `k` workers; the first `n mod k`
/// shards carry one extra row.
pub fn shard_sizes(n: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > n {
        return Err(TrainerError::Argument(format!("{k} workers cannot split a batch of {n}")));
    }
    Ok((0..k).map(|i| n / k + usize::from(i < n % k)).collect())
}

fn check_shards(n: usize, sizes: &[usize]) -> Result<()> {
    if sizes.is_empty() || sizes.contains(&0) || sizes.iter().sum::<usize>() != n {
        return Err(TrainerError::Argument(format!("shard sizes {sizes:?} do not partition a batch of {n}")));
    }
    Ok(())
}

/// Elementwise sum in a fixed balanced-tree order.
fn pairwise_sum(parts: &[Vec<f64>]) -> Vec<f64> {
    match parts {
        [] => Vec::new(),
        [one] => one.clone(),
        _ => {
            let (l, r) = parts.split_at(parts.len() / 2);
            let (a, b) = (pairwise_sum(l), pairwise_sum(r));
            a.iter().zip(&b).map(|(x, y)| x + y).collect()
        }
    }
}

/// Phase gradient over `batch` computed as the shard-size-weighted mean of
/// per-shard gradients, each shard on its own thread.
pub fn sharded_phase_gradients(
    module: &dyn SynthesisModule,
    phase: usize,
    batch: &Batch,
    noise: &StepNoise,
    sizes: &[usize],
) -> Result<PhaseOutput> {
    let n = batch.len();
    check_shards(n, sizes)?;
    let mut bounds = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &s in sizes {
        bounds.push((start, start + s));
        start += s;
    }
    let outputs: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = bounds
            .iter()
            .map(|&(a, b)| {
                let shard = batch.slice(a, b);
                let shard_noise = noise.slice(a, b);
                scope.spawn(move || module.phase_gradients(phase, &shard, &shard_noise))
            })
            .collect();
        // joined in worker order, independent of completion order
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let outputs = outputs.into_iter().collect::<std::result::Result<Vec<_>, _>>()?;

    let weights: Vec<f64> = sizes.iter().map(|&s| s as f64 / n as f64).collect();
    let n_params = outputs[0].grads.len();
    let grads = (0..n_params)
        .map(|p| {
            let parts: Vec<Vec<f64>> =
                outputs.iter().zip(&weights).map(|(o, w)| o.grads[p].data().iter().map(|g| g * w).collect()).collect();
            Tensor::new(outputs[0].grads[p].shape().to_vec(), pairwise_sum(&parts)).expect("same shapes")
        })
        .collect();
    let metrics = outputs[0]
        .metrics
        .iter()
        .enumerate()
        .map(|(m, (name, _))| {
            let parts: Vec<Vec<f64>> = outputs.iter().zip(&weights).map(|(o, w)| vec![o.metrics[m].1 * w]).collect();
            (name.clone(), pairwise_sum(&parts)[0])
        })
        .collect();
    Ok(PhaseOutput { grads, metrics })
}

/// One synchronous data-parallel step over explicit shard sizes. A single
/// shard runs the serial path.
pub fn data_parallel_step_with_shards(
    module: &mut dyn SynthesisModule,
    optimizers: &mut [Optimizer],
    batch: &Batch,
    sizes: &[usize],
    lr: f64,
    rng: &mut ChaCha8Rng,
) -> Result<TrainStepReport> {
    check_shards(batch.len(), sizes)?;
    if sizes.len() == 1 {
        return Ok(training_step(module, optimizers, batch, lr, rng)?);
    }
    let mut report = TrainStepReport::default();
    for phase in 0..module.phases() {
        let noise = module.draw_noise(phase, batch.len(), rng);
        let out = sharded_phase_gradients(module, phase, batch, &noise, sizes)?;
        let g = module.phase_group(phase);
        optimizers[g].apply(&mut module.groups_mut()[g], &out.grads, lr)?;
        report.metrics.extend(out.metrics);
        report.updates += 1;
    }
    Ok(report)
}

/// [`data_parallel_step_with_shards`] with `workers` balanced shards.
pub fn data_parallel_step(
    module: &mut dyn SynthesisModule,
    optimizers: &mut [Optimizer],
    batch: &Batch,
    workers: usize,
    lr: f64,
    rng: &mut ChaCha8Rng,
) -> Result<TrainStepReport> {
    let sizes = shard_sizes(batch.len(), workers)?;
    data_parallel_step_with_shards(module, optimizers, batch, &sizes, lr, rng)
}
