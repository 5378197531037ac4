use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::config::LabelingParadigm;
use crate::tensor::Tensor;

use super::{parse_manifest, seeded_rng, write_pgm, DataError, Manifest, Result};

/// Files written by [`generate_phantom_dataset`].
#[derive(Debug, Clone)]
pub struct PhantomDataset {
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
}

/// One phantom: a jittered Gaussian blob plus noise; class 1 adds a bright disk.
pub fn phantom_image<R: Rng + ?Sized>(class: usize, size: usize, rng: &mut R) -> Tensor {
    let s = size as f64;
    let jitter = s / 16.0;
    let cy = s / 2.0 + rng.random_range(-jitter..=jitter);
    let cx = s / 2.0 + rng.random_range(-jitter..=jitter);
    let width = s / 5.0 * rng.random_range(0.8..=1.2);
    let amplitude = rng.random_range(0.55..=0.75);
    let disk = (class == 1).then(|| {
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let dist = s / 6.0 * rng.random_range(0.6..=1.0);
        let radius = (s / 10.0).max(1.0);
        (cy + dist * angle.sin(), cx + dist * angle.cos(), radius)
    });
    let noise = Normal::new(0.0, 0.03).expect("valid std");
    let mut data = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let (py, px) = (y as f64 + 0.5, x as f64 + 0.5);
            let r2 = (py - cy).powi(2) + (px - cx).powi(2);
            let mut v = 0.1 + amplitude * (-r2 / (2.0 * width * width)).exp();
            if let Some((dy, dx, radius)) = disk {
                if (py - dy).powi(2) + (px - dx).powi(2) <= radius * radius {
                    v += 0.35;
                }
            }
            data.push((v + noise.sample(rng)).clamp(0.0, 1.0));
        }
    }
    Tensor::new(vec![size, size], data).expect("square image")
}

/// Writes a two-class phantom cohort as PGM files plus a labeled `manifest.csv`.
pub fn generate_phantom_dataset(out_dir: &Path, n_per_class: usize, size: usize, seed: u64) -> Result<PhantomDataset> {
    if size < 8 {
        return Err(DataError::Argument(format!("phantom size must be ≥ 8, got {size}")));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| DataError::io(out_dir, e))?;
    let mut text = String::from("SubjectID,Channel_0,Label\n");
    for class in 0..2 {
        for i in 0..n_per_class {
            let name = format!("class{class}_{i:04}");
            let image = phantom_image(class, size, &mut seeded_rng(seed, class as u64, i as u64));
            write_pgm(&image, &out_dir.join(format!("{name}.pgm")))?;
            text.push_str(&format!("{name},{name}.pgm,{class}\n"));
        }
    }
    let manifest_path = out_dir.join("manifest.csv");
    std::fs::write(&manifest_path, &text).map_err(|e| DataError::io(&manifest_path, e))?;
    let manifest = parse_manifest(&text, LabelingParadigm::Labeled, 2)?;
    Ok(PhantomDataset { manifest_path, manifest })
}
