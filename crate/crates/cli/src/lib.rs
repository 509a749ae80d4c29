//! Configuration, orchestration and CSV output for the `skill-luck` binary.

pub mod config;
pub mod run;

pub use config::{
    config_from_value, parse_config, parse_config_with, ConfigError, Experiment, ExperimentConfig, Overrides,
};
pub use run::{run_experiment, run_with_threads, RunSummary};
