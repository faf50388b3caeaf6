//! Acceptance suite: one pass/fail line per criterion.

use std::process::ExitCode;

use riccati_cli::selftest::{run_selftest, CRITERIA};

fn main() -> ExitCode {
    println!("running {CRITERIA} acceptance criteria");
    let report = run_selftest(false);
    let failed: Vec<u32> = report
        .criteria
        .iter()
        .filter(|c| !(c.pass && c.within_budget()))
        .map(|c| c.id)
        .collect();
    if failed.is_empty() {
        println!("acceptance: all {CRITERIA} criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
