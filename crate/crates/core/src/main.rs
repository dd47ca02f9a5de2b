use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use mforge::config::{ExperimentConfig, Samples, Task, Tolerances};
use mforge::report::{report_schema, validate_report};
use mforge::runner::{run, RunOptions};

#[derive(Parser)]
#[command(name = "mforge", version, about = "Flows, critical-point structure and invariants for moment maps composed with invariant convex functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the gradient flow from the initial point; writes flow.csv and flow.json.
    Flow(RunArgs),
    /// Flow to a critical point and decompose its stabilizer.
    Decompose(RunArgs),
    /// Check constancy of the mu-invariant along the orbit of the initial point.
    Invariant(RunArgs),
    /// Solve for the extremal vector field at the initial point.
    Extremal(RunArgs),
    /// Legendre-transform and Tian-Zhu identity checks.
    Legendre(RunArgs),
    /// Run every suite.
    VerifyAll(RunArgs),
    /// Print the JSON schema of reports.
    Schema,
    /// Check that a report file matches the schema.
    Validate { file: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the flow convergence tolerance (`tolerances.grad`).
    #[arg(long)]
    tol: Option<f64>,
}

fn defaults_help() -> String {
    let tol = serde_json::to_string_pretty(&Tolerances::default()).unwrap_or_default();
    let samples = serde_json::to_string_pretty(&Samples::default()).unwrap_or_default();
    format!(
        "Config defaults:\n  function: \"quadratic\"\n  initial_point: \"random\"\n  seed: 0\n  \
         flow.t_max: 200\n  tolerances: {tol}\n  samples: {samples}\n\n\
         Exit codes: 0 success, 2 verification failure, 1 usage or config error."
    )
}

fn execute(task: Task, args: RunArgs) -> Result<ExitCode, String> {
    let text = fs::read_to_string(&args.config).map_err(|e| format!("cannot read {}: {e}", args.config.display()))?;
    let cfg = ExperimentConfig::from_json(&text).map_err(|e| e.to_string())?;
    let opts = RunOptions { out_dir: args.out, seed: args.seed, tol: args.tol };
    let outcome = run(task, &cfg, &opts).map_err(|e| e.to_string())?;
    for suite in &outcome.report.suites {
        println!("{} {}", if suite.passed { "PASS" } else { "FAIL" }, suite.name);
        for c in suite.checks.iter().filter(|c| !c.passed) {
            println!("  {} = {:.3e} (tol {:.1e})", c.name, c.value, c.tol);
        }
        for n in &suite.notes {
            println!("  note: {n}");
        }
    }
    for p in &outcome.written {
        println!("wrote {}", p.display());
    }
    Ok(ExitCode::from(outcome.exit_code() as u8))
}

fn main() -> ExitCode {
    let matches = match Cli::command().after_long_help(defaults_help()).try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Flow(a) => execute(Task::Flow, a),
        Command::Decompose(a) => execute(Task::Decompose, a),
        Command::Invariant(a) => execute(Task::Invariant, a),
        Command::Extremal(a) => execute(Task::Extremal, a),
        Command::Legendre(a) => execute(Task::Legendre, a),
        Command::VerifyAll(a) => execute(Task::VerifyAll, a),
        Command::Schema => {
            println!("{}", serde_json::to_string_pretty(&report_schema()).unwrap_or_default());
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { file } => fs::read_to_string(&file)
            .map_err(|e| format!("cannot read {}: {e}", file.display()))
            .and_then(|t| validate_report(&t).map_err(|e| e.to_string()))
            .map(|r| {
                println!("valid report: task {} (schema {})", r.task, r.schema_version);
                ExitCode::SUCCESS
            }),
    };
    result.unwrap_or_else(|msg| {
        eprintln!("error: {msg}");
        ExitCode::from(1)
    })
}
