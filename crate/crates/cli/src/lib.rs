//! Driver for absorbing-boundary experiments: configuration, presets, runs,
//! invariant verification and CSV/JSON output.

pub mod cli;
pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod run;
pub mod scenario;
pub mod verify;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use run::RunSummary;
