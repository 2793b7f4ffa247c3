//! Experiment harness for cloud K-SVD: configuration, scenarios and
//! plot-ready CSV output.

pub mod config;
pub mod error;
pub mod output;
pub mod scenarios;

pub use config::{ExperimentConfig, Overrides, Scenario};
pub use error::{CliError, Result};
pub use output::{write_report, Artifact, Report, Row};
pub use scenarios::run_scenario;
