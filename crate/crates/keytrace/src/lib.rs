//! File formats, sequence directories and the `keytrace` command-line tool
//! around `keytrace-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod files;
pub mod formats;
pub mod sequence;

pub use config::{Config, EvalParams, ParamArgs};
pub use error::{CliError, CliResult};
