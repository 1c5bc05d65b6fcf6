//! Experiment driver for the `wvset` retrieval engine.

pub mod commands;
pub mod config;

pub use config::{ExperimentConfig, Precision};
