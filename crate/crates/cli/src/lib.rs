//! Experiment runner: TOML configs in, traces, checkpoints, spectra and
//! summaries out.

pub mod compare;
pub mod config;
pub mod plot;
pub mod run;
pub mod theorem;

pub use config::ExperimentConfig;
