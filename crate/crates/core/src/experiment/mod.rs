//! Config loading and the end-to-end commands behind the CLI.

mod commands;
mod config;

pub use commands::*;
pub use config::{BenchSection, ControlSection, DataSource, RunConfig, RunMode, RunSection, Seeds};
