//! Command-line front end: one subcommand per pipeline stage plus
//! `pipeline run`, which executes every stage from a config file.

pub mod args;
pub mod commands;
pub mod error;
pub mod pipeline;
pub mod stages;

pub use args::Cli;
pub use error::CliError;
