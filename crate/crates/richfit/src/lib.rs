//! Command-line front end for the perturbed Richards growth toolkit.
//!
//! The binary is a thin wrapper around [`run`]; tests drive the same entry
//! point with parsed arguments.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod report;

pub use cli::{run, Cli};
pub use error::CliError;
