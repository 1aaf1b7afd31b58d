//! Command implementations behind the `hbkmr` binary. Each command reads or
//! writes a fit directory holding `config.json`, `samples.csv`,
//! `summary.json` and `manifest.json`.

pub mod artifact;
pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod table;

pub use error::{CliError, CliResult};
