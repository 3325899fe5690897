//! Configuration, dispatch and export for the `fmd` command.

pub mod config;
pub mod export;
pub mod run;

pub use config::{parse_config, print_config, ProblemConfig};
pub use run::{run, Overrides, RunOutcome, Status};
