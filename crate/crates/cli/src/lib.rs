//! Configuration, orchestration and tabular output for heterosync experiments.

pub mod config;
pub mod error;
pub mod experiments;
pub mod presets;
pub mod table;
pub mod verify;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::CliError;
pub use table::ResultTable;
