//! Command-line front end for wavepot: scenario files, trajectory
//! snapshots, diagnostics series and run reports.

pub mod diagnostics;
pub mod error;
pub mod runner;
pub mod scenario;
pub mod snapshot;

use std::path::Path;

pub use error::{CliError, Result, EXIT_CEILING, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK};
pub use runner::{dump, run, MonitorResult, RunReport};
pub use scenario::{load_scenario, load_scenario_with, Kind, Scenario};

/// Loads the scenario at `path` and runs it into `out_dir`.
pub fn run_file(path: &Path, overrides: &[String], kind: Option<Kind>, out_dir: &Path) -> Result<RunReport> {
    let scenario = load_scenario_with(path, overrides, kind)?;
    run(&scenario, out_dir)
}
