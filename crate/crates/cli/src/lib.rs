//! Command-line front end for the `nnpi` crate.
//!
//! Verbs: `train`, `evaluate`, `compare`, `histogram` and `gen-data`. All of
//! them read a TOML run configuration; see [`config::RunConfig`].

pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod histogram;
pub mod report;

pub use cli::Cli;
pub use error::CliError;
