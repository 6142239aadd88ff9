//! Experiment configuration, data generation and runners behind the `ana` binary.

pub mod config;
pub mod data;
pub mod experiments;
pub mod targets;
