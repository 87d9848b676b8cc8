//! `phonon-scatter <command> --config <file> [--out <dir>] [--seed <u64>] [--threads <n>]`
//!
//! Exit codes: 0 every check passed, 1 a check failed, 2 configuration
//! rejected, 3 the simulation was flagged invalid.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phonon_core::harness::{run_experiment, ConfigError, ExperimentConfig, ExperimentKind, HarnessError};

const THREADS_ENV: &str = "PHONON_SCATTER_THREADS";

#[derive(Parser)]
#[command(name = "phonon-scatter", version, about = "Experiments on a harmonic chain with a point thermostat")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate scattering coefficients and check their identities.
    Coefficients(Args),
    /// Zero-temperature packet scattering over a lattice-size sweep.
    Scattering(Args),
    /// Thermal production from zero initial data.
    Production(Args),
    /// Stationarity of the Gibbs state.
    Equilibrium(Args),
    /// Memory kernel, mild solution and energy-bound checks.
    Convergence(Args),
    /// Analytic checks of the kinetic limit.
    TransportCheck(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Output directory; defaults to the config's `out_dir`, then `out/<command>`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides `ensemble.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; overrides PHONON_SCATTER_THREADS and the config.
    #[arg(long)]
    threads: Option<usize>,
}

impl Command {
    fn split(self) -> (ExperimentKind, Args) {
        match self {
            Command::Coefficients(a) => (ExperimentKind::Coefficients, a),
            Command::Scattering(a) => (ExperimentKind::Scattering, a),
            Command::Production(a) => (ExperimentKind::Production, a),
            Command::Equilibrium(a) => (ExperimentKind::Equilibrium, a),
            Command::Convergence(a) => (ExperimentKind::Convergence, a),
            Command::TransportCheck(a) => (ExperimentKind::TransportCheck, a),
        }
    }
}

fn reject(key: &str, reason: impl Into<String>) -> HarnessError {
    HarnessError::Config(ConfigError {
        key: key.into(),
        reason: reason.into(),
    })
}

fn load(kind: ExperimentKind, path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| reject("<file>", format!("cannot read `{}`: {e}", path.display())))?;
    let raw: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| reject("<file>", format!("invalid JSON: {e}")))?;
    if let Some(named) = raw.get("experiment").and_then(|v| v.as_str()) {
        if ExperimentKind::parse(named) != Some(kind) {
            return Err(reject(
                "experiment",
                format!("config is for `{named}` but the command is `{}`", kind.name()),
            ));
        }
    }
    Ok(ExperimentConfig::from_value(&raw, Some(kind), path.parent())?)
}

fn thread_count(cli: Option<usize>, cfg: Option<usize>) -> Result<Option<usize>, HarnessError> {
    if let Some(n) = cli {
        return Ok(Some(n));
    }
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| reject(THREADS_ENV, format!("not a thread count: `{v}`")))?;
        return Ok(Some(n));
    }
    Ok(cfg)
}

fn run(command: Command) -> Result<i32, HarnessError> {
    let (kind, args) = command.split();
    let mut cfg = load(kind, &args.config)?;
    if let Some(seed) = args.seed {
        cfg.ensemble.seed = seed;
    }
    let threads = thread_count(args.threads, cfg.threads)?;
    if threads == Some(0) {
        return Err(reject("threads", "must be >= 1"));
    }
    cfg.threads = threads;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| reject("threads", format!("cannot start the worker pool: {e}")))?;
    let report = pool.install(|| run_experiment(&cfg))?;

    let out = args
        .out
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| Path::new("out").join(kind.name()));
    report
        .write(&out)
        .map_err(HarnessError::Failure)?;
    print!("{}", report.summary());
    let code = report.outcome().exit_code();
    println!(
        "{}: {} ({} checks, output in {})",
        kind.name(),
        match code {
            0 => "pass",
            3 => "invalid run",
            _ => "FAIL",
        },
        report.checks.len(),
        out.display()
    );
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
