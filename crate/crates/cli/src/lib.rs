//! Command-line front end for `fraudlab-core`: a config-driven comparison of
//! fraud classifiers, a transaction screener, and a t-SNE exporter.

pub mod config;
pub mod error;
pub mod run;
pub mod screen;

pub use config::{ExperimentConfig, ModelKind};
pub use error::{CliError, Result};
pub use run::{execute, export_artifacts, run_experiment, RunReport, VariantResult};
pub use screen::{screen_transactions, Decision, ScreeningDecision};
