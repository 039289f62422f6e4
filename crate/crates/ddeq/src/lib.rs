//! Command-line front end for `ddeq-core`: solve equilibria, run parameter
//! sweeps, simulate auction data and evaluate the inefficiency diagnostics,
//! writing plot-ready CSV and JSON files.

pub mod cli;
pub mod commands;
pub mod config;
pub mod output;

pub use commands::{run, Status};
pub use config::{Command, RunConfig};
