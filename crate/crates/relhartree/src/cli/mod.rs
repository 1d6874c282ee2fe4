//! Run-configuration surface behind the thin binary.
//!
//! One JSON file drives one subcommand; artifacts land in an output
//! directory as JSON (plus CSV for tabular data) and are reused across
//! commands: a cached scalar ground state feeds sweeps and probes, and
//! `report` folds whatever artifacts it finds into one pass/fail summary.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{run, Command, Outcome};
pub use config::RunConfig;
