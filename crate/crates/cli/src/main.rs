//! `emhlab` command-line entry point.
//!
//! Exit codes: 0 when every run succeeded, 1 when some failed, 2 when
//! nothing succeeded or the experiment could not start.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use emhlab::harness::{emit_report, run_experiment, ExperimentConfig, MasterLog, Outcome, Stage};

#[derive(Parser, Debug)]
#[command(name = "emhlab", version, about = "Weak-form market efficiency experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load securities, check quality and write price and feature tables.
    Ingest(RunArgs),
    /// Run the ADF and variance-ratio batch.
    Econ(RunArgs),
    /// Run walk-forward classification and trading for every unit.
    Backtest(RunArgs),
    /// Write histograms, equity curves and a summary for a finished run.
    Report(ReportArgs),
    /// Run every stage, then the report.
    All(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(short, long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(short = 'j', long)]
    parallelism: Option<usize>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Run directory holding master.json.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    run_dir: Option<PathBuf>,
    /// Locate the run directory from a configuration instead.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(short, long, requires = "config")]
    output_dir: Option<PathBuf>,
    #[arg(short, long, requires = "config")]
    seed: Option<u64>,
}

fn load_config(
    path: &PathBuf,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    parallelism: Option<usize>,
) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(dir) = output_dir {
        // Command-line paths are relative to the working directory.
        config.output_dir = std::path::absolute(&dir).unwrap_or(dir);
    }
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(n) = parallelism {
        config.parallelism = n;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<Outcome> {
    let (args, stages, report) = match cli.command {
        Command::Ingest(a) => (a, vec![Stage::Ingest], false),
        Command::Econ(a) => (a, vec![Stage::Econ], false),
        Command::Backtest(a) => (a, vec![Stage::Backtest], false),
        Command::All(a) => (a, Stage::ALL.to_vec(), true),
        Command::Report(a) => {
            let run_dir = match (a.run_dir, a.config) {
                (Some(dir), _) => dir,
                (None, Some(path)) => load_config(&path, a.output_dir, a.seed, None)?.run_dir(),
                (None, None) => unreachable!("clap requires one of --run-dir or --config"),
            };
            let master = MasterLog::load(&run_dir).with_context(|| format!("reading {}", run_dir.display()))?;
            let files = emit_report(&master, &run_dir)?;
            for f in files {
                println!("{}", f.display());
            }
            return Ok(master.outcome);
        }
    };
    let config = load_config(&args.config, args.output_dir, args.seed, args.parallelism)?;
    let out = run_experiment(&config, &stages)?;
    if report {
        emit_report(&out.master, &out.run_dir)?;
    }
    let m = &out.master;
    let failed_runs = m.runs.iter().filter(|r| !r.completed()).count();
    eprintln!(
        "{}: {} securities, {} runs ({} failed), outcome {:?}",
        out.run_dir.display(),
        m.ingest.len(),
        m.runs.len(),
        failed_runs,
        m.outcome
    );
    println!("{}", out.run_dir.display());
    Ok(m.outcome)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
