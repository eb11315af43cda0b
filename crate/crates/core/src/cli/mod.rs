//! Batch front end: experiment configs in, CSV/JSON reports out.

pub mod config;
pub mod report;
pub mod run;

pub use config::{parse_config, Command, ConfigError, ExperimentConfig, Settings, Sweep, SweepAxis};
pub use report::{Cell, Table};
pub use run::{execute, load_config, run, write_reports, Experiment, Overrides, RunError, RunOutcome};
