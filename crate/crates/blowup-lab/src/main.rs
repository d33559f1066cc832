// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line driver: a JSON problem spec in, deterministic artifacts
//! and a checksummed run report out.
//!
//! The spec file is the only input channel; the flags only locate it, cap
//! the worker pool, and set the print level. Exit codes: 0 on success, 1
//! on I/O or environment failure, 2 on an invalid spec (schema or field
//! validation; the message names the offending field), 3 on numerical
//! failure (non-convergence, or a failed runtime check outside the
//! verification suite), 4 when the verification suite reports a failed
//! check.

mod report;
mod spec;
mod tasks;
mod verify;

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::report::Emitter;
use crate::spec::TaskInput;
use crate::tasks::TaskError;

#[derive(Parser)]
#[command(
    name = "blowup-lab",
    version,
    about = "Reproducible numerical experiments on concentrating solutions: \
             Green fields, Robin maps, bubble interaction spectra, blow-up \
             configurations and rates, and radial linearized modes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one problem spec.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path of the JSON problem spec.
    #[arg(long, value_name = "FILE")]
    spec: PathBuf,
    /// Directory for artifacts and the run report (created if missing).
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Cap the worker pool used for the per-source and per-mode parallel
    /// layers; defaults to the number of cores.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// 0 = silent, 1 = summary, 2 = per-stage timings and checks.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=2))]
    verbosity: u8,
}

const EXIT_IO: u8 = 1;
const EXIT_SPEC: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_VERIFICATION: u8 = 4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => ExitCode::from(run(&args)),
    }
}

fn run(args: &RunArgs) -> u8 {
    let text = match fs::read_to_string(&args.spec) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read spec {}: {e}", args.spec.display());
            return EXIT_SPEC;
        }
    };
    let problem = match spec::parse(&text) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_SPEC;
        }
    };

    if let Some(threads) = args.threads {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
        if let Err(e) = pool {
            eprintln!("cannot configure worker pool: {e}");
            return EXIT_IO;
        }
    }

    let mut emitter = match Emitter::new(&args.out_dir, problem.output.prefix.as_deref()) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("{e:#}");
            return EXIT_IO;
        }
    };

    let mut timings = BTreeMap::new();
    let t0 = Instant::now();
    let outcome = match tasks::execute(&problem, &mut emitter, &mut timings) {
        Ok(outcome) => outcome,
        Err(TaskError::Numerical { context, message }) => {
            eprintln!("task {context} failed: {message}");
            return EXIT_NUMERICAL;
        }
        Err(TaskError::Artifact(e)) => {
            eprintln!("{e:#}");
            return EXIT_IO;
        }
    };
    timings.insert("total".into(), t0.elapsed().as_secs_f64() * 1e3);

    let report_name = problem
        .output
        .report
        .clone()
        .unwrap_or_else(|| "report.json".to_string());
    let report = match emitter.write_report(
        &report_name,
        &problem,
        outcome.residuals,
        outcome.checks,
        timings,
    ) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e:#}");
            return EXIT_IO;
        }
    };

    let failed: Vec<&str> = report
        .payload
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();

    if args.verbosity >= 1 {
        println!(
            "{}: {} checks, {} failed, {} artifacts, payload {}",
            task_name(&problem.task),
            report.payload.checks.len(),
            failed.len(),
            report.payload.artifacts.len(),
            &report.payload_sha256[..12],
        );
    }
    if args.verbosity >= 2 {
        for check in &report.payload.checks {
            println!(
                "  [{}] {} (value {:e}, threshold {:e})",
                if check.passed { "pass" } else { "FAIL" },
                check.name,
                check.value,
                check.threshold,
            );
        }
        for (stage, ms) in &report.timings_ms {
            println!("  {stage}: {ms:.1} ms");
        }
    }

    if failed.is_empty() {
        return 0;
    }
    eprintln!("failed checks: {}", failed.join(", "));
    if matches!(problem.task, TaskInput::Verify) {
        EXIT_VERIFICATION
    } else {
        EXIT_NUMERICAL
    }
}

fn task_name(task: &TaskInput) -> &'static str {
    match task {
        TaskInput::RobinMap => "robin_map",
        TaskInput::GreenEval { .. } => "green_eval",
        TaskInput::FindConfig { .. } => "find_config",
        TaskInput::Predict { .. } => "predict",
        TaskInput::Linearized { .. } => "linearized",
        TaskInput::Verify => "verify",
    }
}
