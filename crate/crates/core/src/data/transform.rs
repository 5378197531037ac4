use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::config::AugmentationConfig;
use crate::tensor::Tensor;

use super::{Batch, DataError, Result};

/// Maps [0, 1] onto `[lo, hi]`, clamping the input first.
pub fn normalize(x: &Tensor, range: (f64, f64)) -> Tensor {
    let (lo, hi) = range;
    x.map(|v| lo + v.clamp(0.0, 1.0) * (hi - lo))
}

/// Inverse of [`normalize`]; results are clamped to [0, 1].
pub fn denormalize(x: &Tensor, range: (f64, f64)) -> Tensor {
    let (lo, hi) = range;
    x.map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResizeMode {
    Nearest,
    Bilinear,
}

/// Source coordinate under the align-corners-false convention.
fn source_coord(i: usize, src: usize, dst: usize) -> f64 {
    (i as f64 + 0.5) * src as f64 / dst as f64 - 0.5
}

/// Resamples the trailing `[H, W]` plane(s) of `x` to `target × target`.
pub fn resize(x: &Tensor, target: usize, mode: ResizeMode) -> Result<Tensor> {
    if target == 0 {
        return Err(DataError::Argument("resize target must be ≥ 1".into()));
    }
    let shape = x.shape();
    if shape.len() < 2 || shape[shape.len() - 2] == 0 || shape[shape.len() - 1] == 0 {
        return Err(DataError::Argument(format!("resize needs a nonempty [.., H, W] tensor, got {shape:?}")));
    }
    let (h, w) = (shape[shape.len() - 2], shape[shape.len() - 1]);
    let planes = x.numel() / (h * w);

    // per output coordinate: (low index, high index, weight of high)
    let taps = |src: usize| -> Vec<(usize, usize, f64)> {
        (0..target)
            .map(|i| match mode {
                ResizeMode::Nearest => {
                    let j = (((i as f64 + 0.5) * src as f64 / target as f64).floor() as usize).min(src - 1);
                    (j, j, 0.0)
                }
                ResizeMode::Bilinear => {
                    let c = source_coord(i, src, target).clamp(0.0, (src - 1) as f64);
                    let lo = c.floor() as usize;
                    let hi = (lo + 1).min(src - 1);
                    (lo, hi, c - lo as f64)
                }
            })
            .collect()
    };
    let rows = taps(h);
    let cols = taps(w);

    let mut out = Vec::with_capacity(planes * target * target);
    for plane in x.data().chunks(h * w) {
        for &(y0, y1, wy) in &rows {
            for &(x0, x1, wx) in &cols {
                let top = plane[y0 * w + x0] * (1.0 - wx) + plane[y0 * w + x1] * wx;
                let bottom = plane[y1 * w + x0] * (1.0 - wx) + plane[y1 * w + x1] * wx;
                out.push(top * (1.0 - wy) + bottom * wy);
            }
        }
    }
    let mut new_shape = shape[..shape.len() - 2].to_vec();
    new_shape.extend([target, target]);
    Ok(Tensor::new(new_shape, out).expect("sizes computed above"))
}

fn square_plane(plane: &[f64]) -> usize {
    let s = (plane.len() as f64).sqrt().round() as usize;
    debug_assert_eq!(s * s, plane.len());
    s
}

/// Mirrors a square `s × s` plane left to right, in place.
pub fn flip_horizontal(plane: &mut [f64], width: usize) {
    for row in plane.chunks_mut(width) {
        row.reverse();
    }
}

/// Mirrors a plane top to bottom, in place.
pub fn flip_vertical(plane: &mut [f64], width: usize) {
    let h = plane.len() / width;
    for y in 0..h / 2 {
        let (top, bottom) = plane.split_at_mut((h - 1 - y) * width);
        top[y * width..(y + 1) * width].swap_with_slice(&mut bottom[..width]);
    }
}

/// Rotates a square plane by 90°·k counter-clockwise.
pub fn rotate90(plane: &[f64], k: usize) -> Vec<f64> {
    let s = square_plane(plane);
    let mut cur = plane.to_vec();
    for _ in 0..k % 4 {
        let mut next = vec![0.0; cur.len()];
        for y in 0..s {
            for x in 0..s {
                next[(s - 1 - x) * s + y] = cur[y * s + x];
            }
        }
        cur = next;
    }
    cur
}

/// Per-sample random flips, 90° rotations and additive Gaussian noise.
/// Noisy values are clamped back to `range`. Labels are untouched.
pub fn augment<R: Rng + ?Sized>(batch: &mut Batch, flags: &AugmentationConfig, range: (f64, f64), rng: &mut R) {
    if flags.is_identity() {
        return;
    }
    let shape = batch.images.shape().to_vec();
    let (c, h, w) = (shape[1], shape[2], shape[3]);
    let noise = Normal::new(0.0, flags.noise_std).expect("noise_std validated ≥ 0");
    for sample in batch.images.data_mut().chunks_mut(c * h * w) {
        let hflip = flags.hflip && rng.random_bool(0.5);
        let vflip = flags.vflip && rng.random_bool(0.5);
        let k = if flags.rot90 && h == w { rng.random_range(0..4usize) } else { 0 };
        for plane in sample.chunks_mut(h * w) {
            if hflip {
                flip_horizontal(plane, w);
            }
            if vflip {
                flip_vertical(plane, w);
            }
            if k != 0 {
                let rotated = rotate90(plane, k);
                plane.copy_from_slice(&rotated);
            }
        }
        if flags.noise_std > 0.0 {
            for v in sample.iter_mut() {
                *v = (*v + noise.sample(rng)).clamp(range.0, range.1);
            }
        }
    }
}
