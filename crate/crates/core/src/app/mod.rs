//! Scenarios, configuration files and the driver behind the command line.

pub mod run;
pub mod scenario;

pub use run::{configure_threads, dry_run, run, run_level, LevelResult, Overrides, RunSummary};
pub use scenario::{load_config, ExactSolution, Scenario, BUILTIN_NAMES};
