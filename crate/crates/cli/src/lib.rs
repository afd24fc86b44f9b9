//! Experiment runner, dataset files and reports for `sensorprint`.

pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod report;

pub use config::{Experiment, ExperimentConfig};
pub use dataset::Dataset;
pub use error::{CliError, Result};
pub use experiment::{analyze, extract_fingerprints, resolve_seed, run_experiment, simulate_devices, ExperimentResult, Outcome};
pub use report::{emit_report, Format};
