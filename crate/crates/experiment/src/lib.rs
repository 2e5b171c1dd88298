//! Monte Carlo harness for coded-mask compressive phase retrieval: success
//! rate over a `(k, M)` grid, minimal `M` per target success rate, and MSE
//! against SNR.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod output;
pub mod seed;
pub mod trial;

pub use config::{Experiment, ExperimentConfig, OutputFormat, Variant};
pub use experiments::{run, run_noise_sweep, run_phase_transition, run_success_rate, Outcome};
pub use trial::{run_trial, GridPoint, TrialContext, TrialRecord};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] cpr_core::CprError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
