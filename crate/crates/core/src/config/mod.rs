//! Experiment configuration: a small indentation-based document format, schema
//! validation with located errors, and a canonical dump.

mod document;
mod schema;

use thiserror::Error;

pub use document::{parse_document, parse_document_bytes, ConfigDocument, Entry, Node, NodeKind, Scalar};
pub use schema::{
    dump_effective_config, validate_config, AugmentationConfig, AutoencoderConfig, DiffusionConfig, ExperimentConfig,
    GanConfig, LabelingParadigm, ModelFamily, OptimizerConfig, OptimizerName, SchedulerConfig, SchedulerName,
};

/// A parse or validation failure, located at a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ConfigError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ConfigError { line, column, message: message.into() }
    }
}

/// Parses and validates in one go.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    validate_config(&parse_document(text)?)
}

/// Like [`parse_config`] but accepts raw bytes, reporting invalid UTF-8 as an error.
pub fn parse_config_bytes(bytes: &[u8]) -> Result<ExperimentConfig, ConfigError> {
    validate_config(&parse_document_bytes(bytes)?)
}
