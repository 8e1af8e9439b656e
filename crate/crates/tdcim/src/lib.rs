//! Configuration, file formats and experiment runners around `tdcim-core`.

pub mod commands;
pub mod config;
pub mod formats;

pub use commands::{Check, Outcome, Run};
pub use config::ExperimentConfig;
