use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use riccati_cli::run::apply_overrides;
use riccati_cli::scenario::ValidationIssue;
use riccati_cli::selftest::{run_selftest, write_selftest_report};
use riccati_cli::{parse_scenario, run_scenario, RunOptions, Scenario, ScenarioError, EXIT_INVARIANT, EXIT_OK, EXIT_VALIDATION};

#[derive(Parser)]
#[command(name = "riccati", version, about = "Full vs reduced (Riccati) evolution of N-level systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory, overriding the scenario's `output.directory`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Replace `time.steps` of the scenario.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    steps_override: Option<u64>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task of a scenario.
    Run { scenario: PathBuf },
    /// Parse and validate a scenario without running it.
    Validate { scenario: PathBuf },
    /// Run the acceptance suite.
    Selftest,
}

#[derive(Serialize)]
struct ErrorOutput<'a> {
    error: &'static str,
    file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    issues: &'a [ValidationIssue],
}

fn load(path: &PathBuf) -> Result<Scenario, ExitCode> {
    let fail = |error, message: Option<String>, issues: &[ValidationIssue]| {
        let out = ErrorOutput {
            error,
            file: path.display().to_string(),
            message,
            issues,
        };
        eprintln!("{}", serde_json::to_string_pretty(&out).expect("serializable"));
        ExitCode::from(EXIT_VALIDATION)
    };
    let text = std::fs::read_to_string(path).map_err(|e| fail("io", Some(e.to_string()), &[]))?;
    match parse_scenario(&text) {
        Ok(sc) => Ok(sc),
        Err(ScenarioError::Parse(m)) => Err(fail("parse", Some(m), &[])),
        Err(ScenarioError::Validation(issues)) => Err(fail("validation", None, &issues)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = RunOptions {
        out_dir: cli.out_dir.clone(),
        steps_override: cli.steps_override.map(|s| s as usize),
        quiet: cli.quiet,
    };
    match &cli.command {
        Command::Validate { scenario } => match load(scenario) {
            Ok(sc) => {
                if !cli.quiet {
                    println!("{}: ok ({} task(s))", sc.name, sc.tasks.len());
                }
                ExitCode::from(EXIT_OK)
            }
            Err(code) => code,
        },
        Command::Run { scenario } => {
            let mut sc = match load(scenario) {
                Ok(sc) => sc,
                Err(code) => return code,
            };
            apply_overrides(&mut sc, &opts);
            let out = run_scenario(&sc, &opts);
            if let Some(err) = &out.report.error {
                eprintln!("{}", serde_json::to_string_pretty(err).expect("serializable"));
            }
            if !cli.quiet {
                for p in out.traces.iter().chain(&out.report_path) {
                    println!("wrote {}", p.display());
                }
            }
            ExitCode::from(out.exit_code)
        }
        Command::Selftest => {
            let report = run_selftest(cli.quiet);
            let dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
            if let Err(e) = write_selftest_report(&dir, &report) {
                eprintln!("writing selftest report: {e}");
            }
            let ok = report.all_pass();
            if !cli.quiet {
                let passed = report.criteria.iter().filter(|c| c.pass && c.within_budget()).count();
                println!("{passed}/{} criteria passed", report.criteria.len());
            }
            ExitCode::from(if ok { EXIT_OK } else { EXIT_INVARIANT })
        }
    }
}
