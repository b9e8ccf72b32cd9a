//! Command-line front end for cut-and-project computations: TOML scheme
//! configs, CSV/JSON output and the command implementations.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use config::Config;
pub use error::CliError;
