pub mod tensor;
pub mod nn;
pub mod config;
pub mod data;
pub mod models;
pub mod metrics;
pub mod trainer;
