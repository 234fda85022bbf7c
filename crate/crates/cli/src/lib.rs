//! Experiment runner: config parsing, dataset preparation, the
//! `train-source` / `adapt` / `synth` / `report` verbs and their output tables.

pub mod commands;
pub mod config;
pub mod datasets;
mod error;
pub mod manifest;
pub mod tables;

pub use error::{CliError, CliResult};
