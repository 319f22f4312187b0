//! `multisearch` command line: scenario loading, dispatch and report output.
//!
//! Exit codes: 0 on success, 1 when a verdict fails (a failed dominance or
//! theorem check, a closure violation, a Monte Carlo mismatch, or a result
//! that contradicts the scenario's `[expect]` section), 2 on input errors.

pub mod commands;
pub mod report;
pub mod scenario;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use multisearch_core::statics::ClosureOperator;
use multisearch_core::{FunctionClass, TheoremId};

pub use commands::Outcome;
pub use report::{emit, format_num, Format, Report, Value};
pub use scenario::{template, Scenario, TemplateKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT_FAILED: i32 = 1;
pub const EXIT_INPUT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "multisearch", version, about = "Multidimensional sequential search: solve, compare, verify")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reservation utility, value function and acceptance set for `f`.
    Solve(CommonArgs),
    /// Whether `f` dominates `g` on a function class.
    Dominate(CommonArgs),
    /// Check a comparative statics theorem on one case or a generated suite.
    Verify(CommonArgs),
    /// Test closure of a class under truncation, affine maps or clamping.
    Closure(CommonArgs),
    /// Monte Carlo evaluation of threshold policies.
    Simulate(CommonArgs),
    /// Print a starter scenario file.
    Template {
        #[arg(value_enum)]
        kind: TemplateKind,
        /// Write the scenario here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Scenario file (TOML, schema_version = 1).
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Solver tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub class: Option<FunctionClass>,
    #[arg(long)]
    pub theorem: Option<TheoremId>,
    /// Machine-readable report destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Encoding of the --out report.
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Worker threads for suites (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Generated suite size.
    #[arg(long)]
    pub cases: Option<usize>,
    /// Replay a single case of a generated suite.
    #[arg(long)]
    pub case: Option<usize>,
    /// Closure operator.
    #[arg(long)]
    pub operator: Option<ClosureOperator>,
    /// Closure samples per class and operator.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Monte Carlo episodes.
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Extra policy thresholds to simulate (repeatable).
    #[arg(long = "threshold")]
    pub thresholds: Vec<f64>,
}

/// Parses `argv` (program name first), runs the command and writes the text
/// table to `stdout`. Diagnostics go to `stderr`.
pub fn run_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    match commands::execute(&cli.command, stdout) {
        Ok(Outcome { passed: true }) => EXIT_OK,
        Ok(Outcome { passed: false }) => EXIT_VERDICT_FAILED,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            EXIT_INPUT_ERROR
        }
    }
}

pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
