use std::path::Path;

use rand::seq::SliceRandom;

use crate::config::{ExperimentConfig, LabelingParadigm};
use crate::tensor::Tensor;

use super::{normalize, read_pgm, resize, seeded_rng, DataError, Manifest, ResizeMode, Result};

/// A minibatch: `images` is `[N, C, H, W]` in the normalization range.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub images: Tensor,
    pub labels: Option<Vec<usize>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.images.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rows `start..end` as a new batch.
    pub fn slice(&self, start: usize, end: usize) -> Batch {
        Batch {
            images: self.images.slice_rows(start, end).expect("slice within batch"),
            labels: self.labels.as_ref().map(|l| l[start..end].to_vec()),
        }
    }
}

/// Decoded, resized and normalized samples held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub subject_ids: Vec<String>,
    /// One `[C, S, S]` tensor per sample.
    pub images: Vec<Tensor>,
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Gathers the given sample indices into one batch.
    pub fn gather(&self, indices: &[usize]) -> Batch {
        let picked: Vec<Tensor> = indices.iter().map(|&i| self.images[i].clone()).collect();
        Batch {
            images: Tensor::stack(&picked).expect("homogeneous sample shapes"),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }
}

/// Reads each record's channels unchanged (values in [0, 1], native size)
/// as one `[C, H, W]` tensor per record.
pub fn load_cohort(manifest: &Manifest, root: &Path) -> Result<Vec<Tensor>> {
    manifest
        .records
        .iter()
        .map(|record| {
            let mut data = Vec::new();
            let mut dims: Option<Vec<usize>> = None;
            for rel in &record.channel_paths {
                let path = if rel.is_absolute() { rel.clone() } else { root.join(rel) };
                let plane = read_pgm(&path)?;
                if dims.as_deref().is_some_and(|d| d != plane.shape()) {
                    return Err(DataError::manifest(record.row, "channel images differ in size"));
                }
                dims = Some(plane.shape().to_vec());
                data.extend_from_slice(plane.data());
            }
            let d = dims.expect("at least one channel");
            Ok(Tensor::new(vec![record.channel_paths.len(), d[0], d[1]], data).expect("sizes match"))
        })
        .collect()
}

/// Reads every file listed in `manifest` (and nothing else), relative to `root`.
pub fn load_dataset(manifest: &Manifest, root: &Path, cfg: &ExperimentConfig) -> Result<Dataset> {
    if manifest.is_empty() {
        return Err(DataError::Argument("manifest lists no samples".into()));
    }
    if manifest.channels != cfg.channels {
        return Err(DataError::manifest(
            1,
            format!("manifest has {} channel column(s), config expects {}", manifest.channels, cfg.channels),
        ));
    }
    if manifest.paradigm != cfg.labeling_paradigm {
        return Err(DataError::Argument(format!(
            "manifest paradigm {} does not match config {}",
            manifest.paradigm, cfg.labeling_paradigm
        )));
    }
    let size = cfg.image_size;
    let mut images = Vec::with_capacity(manifest.len());
    for record in &manifest.records {
        let mut data = Vec::with_capacity(cfg.channels * size * size);
        for rel in &record.channel_paths {
            let path = if rel.is_absolute() { rel.clone() } else { root.join(rel) };
            let mut plane = read_pgm(&path)?;
            if plane.shape() != [size, size] {
                plane = resize(&plane, size, ResizeMode::Bilinear)?;
            }
            data.extend_from_slice(normalize(&plane, cfg.normalization_range).data());
        }
        images.push(Tensor::new(vec![cfg.channels, size, size], data).expect("sizes match"));
    }
    let labels = match manifest.paradigm {
        LabelingParadigm::Labeled => Some(manifest.records.iter().map(|r| r.label.expect("labeled")).collect()),
        LabelingParadigm::Unlabeled => None,
    };
    Ok(Dataset { subject_ids: manifest.records.iter().map(|r| r.subject_id.clone()).collect(), images, labels })
}

/// Shuffled index batches for one epoch; the last partial batch is kept.
pub fn batch_indices(n: usize, batch_size: usize, epoch: u64, seed: u64) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch_size must be ≥ 1");
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(seed, epoch, 0));
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

pub fn make_batches(dataset: &Dataset, batch_size: usize, epoch: u64, seed: u64) -> Vec<Batch> {
    batch_indices(dataset.len(), batch_size, epoch, seed).iter().map(|idx| dataset.gather(idx)).collect()
}
