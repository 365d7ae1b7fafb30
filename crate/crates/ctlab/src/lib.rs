//! Experiment runner for the concurrent-transmission laboratory: JSON specs,
//! parallel Monte-Carlo execution, the PER-table cache and CSV/JSON output.

pub mod cache;
pub mod commands;
pub mod error;
pub mod output;
pub mod run;
pub mod spec;

pub use error::{CliError, Result};
pub use run::RunOptions;
