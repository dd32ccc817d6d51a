//! Experiment runner for the two-UE uplink NOMA error analysis: config
//! parsing, parallel simulation, CSV output and figure presets.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod runner;

pub use error::{CliError, CliResult};
