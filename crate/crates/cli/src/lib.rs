//! Library side of the `cimsim` command: config parsing, result files and verbs.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use error::CliError;
