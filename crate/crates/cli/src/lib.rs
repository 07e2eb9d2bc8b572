//! Config-driven experiment runner for tail-process simulation and
//! certification.

pub mod config;
pub mod run;

pub use config::{validate_config, ConfigError, ExperimentConfig, Stage};
pub use run::{run, Check, RunError, RunOutput, RunReport};
