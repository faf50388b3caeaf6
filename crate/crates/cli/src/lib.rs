//! Scenario runner: parses scenario files, drives the full and reduced
//! evolutions, and writes CSV traces and JSON reports.

pub mod invariants;
pub mod report;
pub mod run;
pub mod scenario;
pub mod selftest;

pub use run::{run_scenario, RunOptions, RunOutcome, EXIT_BREAKDOWN, EXIT_INVARIANT, EXIT_OK, EXIT_VALIDATION};
pub use scenario::{parse_scenario, Scenario, ScenarioError};
