//! Configuration-driven experiment runner for `kerr-core`.

pub mod config;
pub mod experiments;
pub mod runner;

pub use config::{validate, Diagnostic, Experiment, ExperimentConfig};
pub use runner::{run, RunManifest};

/// Environment variable overriding the configured worker count.
pub const WORKERS_ENV: &str = "KERRSIM_WORKERS";
