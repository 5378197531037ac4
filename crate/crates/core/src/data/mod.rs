//! Manifest ingestion, PGM image I/O, preprocessing, augmentation, batching
//! and a synthetic phantom cohort generator.

mod batch;
mod manifest;
mod phantom;
mod pgm;
mod seed;
mod transform;

use std::path::PathBuf;

use thiserror::Error;

pub use batch::{batch_indices, load_cohort, load_dataset, make_batches, Batch, Dataset};
pub use manifest::{
    manifest_to_csv, parse_manifest, read_manifest, read_manifest_auto, write_manifest, Manifest, SampleRecord,
};
pub use phantom::{generate_phantom_dataset, phantom_image, PhantomDataset};
pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_pgm};
pub use seed::{derive_seed, seeded_rng};
pub use transform::{augment, denormalize, flip_horizontal, flip_vertical, normalize, resize, rotate90, ResizeMode};

#[derive(Debug, Error)]
pub enum DataError {
    /// A manifest problem; `row` is the 1-based line in the CSV (header is row 1).
    #[error("manifest row {row}: {message}")]
    Manifest { row: usize, message: String },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Argument(String),
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataError::Io { path: path.into(), source }
    }

    pub(crate) fn manifest(row: usize, message: impl Into<String>) -> Self {
        DataError::Manifest { row, message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, DataError>;
