//! `mslp` — generate, solve, compare, and verify multistage stochastic
//! linear programs from the command line.
//!
//! Subcommands: `generate` (synthetic hydro-thermal instances), `solve`
//! (one variant, logged), `compare` (several variants against the `sddp-qp`
//! baseline), `dep` (exact deterministic equivalent), and `validate`
//! (structural instance checks).
//!
//! Exit codes are a stable contract: 0 success, 1 usage, 2 I/O or parse
//! failure, 3 solver failure (including instances that fail validation).

mod commands;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mslp::variants::Variant;

/// Environment variable naming a run-configuration file. It supplies the
/// config path only; the `--config` flag takes precedence and every other
/// setting still comes from file and flags.
pub const CONFIG_ENV: &str = "MSLP_CONFIG";

/// Iteration budget used when neither `--max-iter` nor `--time-limit` is
/// given by flag or config.
pub const DEFAULT_MAX_ITERATIONS: u64 = 200;

#[derive(Parser)]
#[command(
    name = "mslp",
    version,
    about = "Multistage stochastic linear programming by SDDP with adaptive \
             scenario-partition refinement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic hydro-thermal instance file.
    Generate(GenerateArgs),
    /// Run one solver variant on an instance and report its bounds.
    Solve(SolveArgs),
    /// Run several variants under one budget and tabulate lower bounds.
    Compare(CompareArgs),
    /// Solve the deterministic equivalent exactly (small instances only).
    Dep(DepArgs),
    /// Check an instance file and report every structural violation.
    Validate(ValidateArgs),
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Planning horizon T [default: 25, or the config's value].
    #[arg(long = "T", value_name = "STAGES")]
    pub horizon: Option<usize>,
    /// Realizations per stage [default: 50, or the config's value].
    #[arg(long = "xi", value_name = "COUNT")]
    pub realizations: Option<usize>,
    /// Generator seed [default: 0, or the config's value].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run configuration; its `[hydro]` table seeds the generator.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output instance file.
    #[arg(short, long, value_name = "PATH")]
    pub output: PathBuf,
}

/// Solver knobs shared by `solve` and `compare`. Precedence: built-in
/// defaults, then the configuration file, then these flags.
#[derive(Args, Clone, Default)]
pub struct SolverFlags {
    /// Run configuration file (TOML); flags override its values.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for every random stream in the run.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Coarse-tree size threshold in [0, 1] that ends preprocessing.
    #[arg(long, value_name = "NU")]
    pub nu: Option<f64>,
    /// Stalled-bound window: refine after N iterations without progress.
    #[arg(long = "stall-n", value_name = "N")]
    pub stall_n: Option<usize>,
    /// Relative lower-bound progress below which the bound counts as stalled.
    #[arg(long = "stall-eps", value_name = "EPS")]
    pub stall_eps: Option<f64>,
    /// Dual-distance threshold for partition refinement.
    #[arg(long = "dual-eps", value_name = "EPS")]
    pub dual_eps: Option<f64>,
    /// Cut violation tolerance.
    #[arg(long = "cut-eps", value_name = "EPS")]
    pub cut_eps: Option<f64>,
    /// Stage-importance threshold Z for spap [default: median myopic cost].
    #[arg(long = "importance-Z", value_name = "Z")]
    pub importance_z: Option<f64>,
    /// Forward sample paths per iteration.
    #[arg(long = "samples-per-iter", value_name = "COUNT")]
    pub samples_per_iter: Option<usize>,
    /// Wall-clock budget in seconds.
    #[arg(long = "time-limit", value_name = "SECONDS")]
    pub time_limit: Option<f64>,
    /// Iteration budget [default: 200 when no budget is set anywhere].
    #[arg(long = "max-iter", value_name = "COUNT")]
    pub max_iter: Option<u64>,
}

#[derive(Args)]
pub struct SolveArgs {
    /// Instance file; omit to generate from the config's `[hydro]` table.
    #[arg(value_name = "INSTANCE")]
    pub instance: Option<PathBuf>,
    /// Solver variant [default: the config's, else sddp-qp].
    #[arg(long, value_name = "NAME")]
    pub variant: Option<Variant>,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Write the per-iteration table here, plus a JSON summary next to it.
    #[arg(long, value_name = "PATH")]
    pub log: Option<PathBuf>,
    /// Stdout layout: aligned summary or machine-readable rows.
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Args)]
pub struct CompareArgs {
    /// Instance file; omit to generate from the config's `[hydro]` table.
    #[arg(value_name = "INSTANCE")]
    pub instance: Option<PathBuf>,
    /// Comma-separated variants to run [default: all seven].
    #[arg(long, value_delimiter = ',', value_name = "NAMES")]
    pub variants: Vec<Variant>,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Wall-clock checkpoints (seconds) reported as extra columns.
    #[arg(long = "checkpoint-time", value_delimiter = ',', value_name = "SECONDS")]
    pub checkpoint_time: Vec<f64>,
    /// Iteration checkpoints reported as extra columns.
    #[arg(long = "checkpoint-iter", value_delimiter = ',', value_name = "ITERS")]
    pub checkpoint_iter: Vec<u64>,
    /// Write each run's log as `PREFIX.<variant>.csv` plus JSON summaries.
    #[arg(long, value_name = "PREFIX")]
    pub log: Option<PathBuf>,
    /// Stdout layout for the comparison table.
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Args)]
pub struct DepArgs {
    /// Instance file; omit to generate from the config's `[hydro]` table.
    #[arg(value_name = "INSTANCE")]
    pub instance: Option<PathBuf>,
    /// Run configuration (for a generated instance).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Refuse to expand scenario trees with more nodes than this.
    #[arg(long = "node-cap", value_name = "NODES")]
    pub node_cap: Option<u64>,
}

#[derive(Args)]
pub struct ValidateArgs {
    /// Instance file to check.
    #[arg(value_name = "INSTANCE")]
    pub instance: PathBuf,
}

/// Stdout layout selector.
#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// Aligned, human-readable columns.
    Table,
    /// Comma-separated rows with full-precision numbers.
    Delimited,
}

/// A failed command and the exit code it maps to. Commands that already
/// printed their report leave `message` empty.
pub struct Failure {
    pub code: u8,
    pub message: Option<String>,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: Some(message.into()),
        }
    }

    pub fn silent(code: u8) -> Self {
        Failure {
            code,
            message: None,
        }
    }
}

impl From<mslp::Error> for Failure {
    fn from(e: mslp::Error) -> Self {
        let code = match &e {
            mslp::Error::Io { .. } | mslp::Error::Parse { .. } | mslp::Error::Version { .. } => 2,
            _ => 3,
        };
        Failure {
            code,
            message: Some(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests arrive as "errors" but are successes.
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Generate(args) => commands::generate(args),
        Command::Solve(args) => commands::solve(args),
        Command::Compare(args) => commands::compare(args),
        Command::Dep(args) => commands::dep(args),
        Command::Validate(args) => commands::validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            if let Some(message) = &failure.message {
                eprintln!("error: {message}");
            }
            ExitCode::from(failure.code)
        }
    }
}
