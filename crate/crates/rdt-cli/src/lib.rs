//! File formats, experiment orchestration, and report rendering around
//! `rdt-core`. The `rdt` binary in this crate is the command-line front end.

pub mod config;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod report;

pub use error::{CliError, Result};
