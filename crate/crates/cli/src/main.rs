//! Command-line front end for `finecap-core`: runs scenario files, the seeded
//! property battery, and the exponential-cusp spine demonstration.
//!
//! Exit codes: `0` when every task ran and every check passed, `1` when a task
//! failed to converge or a property check failed, `2` for argument, parse, or
//! validation errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use finecap_core::fine::spine_scenario;
use finecap_core::scenario::{
    parse_scenario, property_suite, run_scenario, write_json, Profile, RunSummary, Scenario,
};

/// Grid capacity runs, thinness probes, and property checks.
#[derive(Parser)]
#[command(name = "finecap", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config file (or a builtin scenario such as `annulus2d`).
    Run {
        /// Path to a scenario config, or the name of a builtin scenario.
        scenario: String,
        /// Worker thread budget (falls back to FINECAP_THREADS). Tasks run
        /// sequentially, so results never depend on this value.
        #[arg(long)]
        threads: Option<usize>,
        /// Directory receiving results.csv and per-task artifacts.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the seeded property battery and write a JSON report.
    Check {
        /// Seed for the randomized trials.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Battery size: `quick` or `full`.
        #[arg(long, default_value = "quick")]
        profile: String,
        /// Directory receiving check.json.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Build and run the exponential-cusp spine demonstration.
    Spine {
        /// Ambient dimension (2 or 3).
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Nodes per axis (odd, at least 17).
        #[arg(long, default_value_t = 257)]
        n: usize,
        /// Worker thread budget (falls back to FINECAP_THREADS); see `run`.
        #[arg(long)]
        threads: Option<usize>,
        /// Directory receiving results.csv and per-task artifacts.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run {
            scenario,
            threads,
            out,
        } => {
            resolve_threads(threads)?;
            let sc = load_scenario(&scenario)?;
            finish_run(run_scenario(&sc, &out)?)
        }
        Command::Check { seed, profile, out } => {
            let profile = Profile::parse(&profile)
                .with_context(|| format!("unknown profile {profile:?}; expected quick or full"))?;
            run_check(seed, profile, &out)
        }
        Command::Spine {
            dim,
            n,
            threads,
            out,
        } => {
            resolve_threads(threads)?;
            let sc = spine_scenario(dim, n)?;
            finish_run(run_scenario(&sc, &out)?)
        }
    }
}

/// Validates the thread budget from `--threads` or `FINECAP_THREADS`.
///
/// Tasks are executed one at a time regardless (their artifacts land under a
/// shared output directory and every write is already atomic), so the budget
/// only gets validated, never used to spawn workers.
fn resolve_threads(flag: Option<usize>) -> Result<usize> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var("FINECAP_THREADS") {
            Ok(s) => s
                .trim()
                .parse::<usize>()
                .with_context(|| format!("FINECAP_THREADS must be a positive integer, got {s:?}"))?,
            Err(_) => 1,
        },
    };
    if n == 0 {
        bail!("thread count must be at least 1");
    }
    if n > 1 {
        eprintln!("note: tasks run sequentially; results do not depend on the thread budget");
    }
    Ok(n)
}

/// Loads a scenario from a file path, falling back to builtin names.
fn load_scenario(arg: &str) -> Result<Scenario> {
    let path = Path::new(arg);
    if path.exists() {
        return Ok(Scenario::from_path(path)?);
    }
    if let Some(text) = Scenario::builtin(arg) {
        return Ok(parse_scenario(text)?);
    }
    bail!("no scenario file {arg:?} and no builtin scenario of that name (builtins: annulus2d)");
}

/// Prints one line per task plus the artifact list; exit 1 on any failure.
fn finish_run(summary: RunSummary) -> Result<ExitCode> {
    for row in &summary.rows {
        let value = row
            .value
            .map(|v| format!("{v:.6e}"))
            .unwrap_or_else(|| "-".to_string());
        let status = match row.converged {
            Some(false) => "FAILED",
            _ => "ok",
        };
        println!("{:<24} {:<12} value={:<16} {}", row.task, row.kind, value, status);
    }
    println!("results: {}", summary.csv_path.display());
    for artifact in &summary.artifacts {
        println!("artifact: {}", artifact.display());
    }
    if summary.ok() {
        Ok(ExitCode::SUCCESS)
    } else {
        for task in &summary.failed_tasks {
            eprintln!("task failed: {task}");
        }
        for prop in &summary.failed_properties {
            eprintln!("property check failed: {prop}");
        }
        Ok(ExitCode::from(1))
    }
}

/// Runs the property battery, writes `check.json`, prints a per-check table.
fn run_check(seed: u64, profile: Profile, out: &Path) -> Result<ExitCode> {
    let report = property_suite(seed, profile)?;
    std::fs::create_dir_all(out)?;
    let path = out.join("check.json");
    write_json(&path, &report)?;
    for r in &report.reports {
        println!(
            "{:<28} {} (trials {}, failures {}, worst slack {:.3e})",
            r.name,
            if r.pass { "pass" } else { "FAIL" },
            r.trials,
            r.failures,
            r.worst_slack,
        );
    }
    println!(
        "battery: {} (seed {}, profile {})",
        if report.pass { "PASS" } else { "FAIL" },
        report.seed,
        report.profile
    );
    println!("report: {}", path.display());
    Ok(if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
