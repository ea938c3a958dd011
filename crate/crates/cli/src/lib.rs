//! Command-line front end for the two-level laser toolkit.

pub mod args;
pub mod commands;
pub mod error;
pub mod output;

pub use args::Cli;
pub use commands::{run, Outcome};
pub use error::CliError;
