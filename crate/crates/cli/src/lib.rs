//! Command-line front end: run configuration, subcommands and exit codes.

pub mod commands;
pub mod config;
pub mod error;
pub mod summary;

pub use commands::{
    cmd_backtest, cmd_fm, cmd_map, cmd_report, cmd_score, cmd_synth, prepare, Prepared,
};
pub use config::RunConfig;
pub use error::{CliError, CliResult};
