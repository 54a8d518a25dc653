//! Command-line front end for `sturm-core`: JSON problem files in, JSON /
//! CSV / text result records out.

pub mod config;
pub mod record;
pub mod run;

pub use config::{ConfigError, Format, Overrides, ProblemConfig};
pub use record::ResultRecord;
pub use run::{run_converge, run_probe, run_solve, run_verify, CliError};
