//! Config-driven experiments: the commands behind the command-line tool.

mod commands;
mod config;

pub use commands::*;
pub use config::*;
