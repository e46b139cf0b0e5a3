use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use clusterbench::harness::pipeline::{self, Outcome};
use clusterbench::harness::{HarnessError, RunConfig};
use clusterbench::par;

/// Benchmark classical clustering algorithms on synthetic data.
#[derive(Debug, Parser)]
#[command(name = "clusterbench", version)]
struct Cli {
    /// Run configuration (TOML). Built-in defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; overrides the configuration.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replace results left by an earlier invocation.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the dataset corpus.
    Gen,
    /// Evaluate every algorithm with default parameters.
    Run,
    /// Accuracy curves over the requested cluster count.
    VaryK,
    /// One-parameter-at-a-time sensitivity sweeps.
    Sweep1d,
    /// Random multi-parameter sweeps inside derived bounds.
    Sweepnd,
    /// Merge stage summaries and run rank tests.
    Report,
}

fn load_config(cli: &Cli) -> Result<RunConfig, HarnessError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
                path: path.clone(),
                source,
            })?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<Outcome, HarnessError> {
    let cfg = load_config(cli)?;
    let step = match cli.command {
        Command::Gen => pipeline::generate,
        Command::Run => pipeline::run_defaults,
        Command::VaryK => pipeline::run_vary_k,
        Command::Sweep1d => pipeline::run_sweep1d,
        Command::Sweepnd => pipeline::run_sweepnd,
        Command::Report => pipeline::report,
    };
    par::with_workers(cfg.workers, || step(&cfg, cli.force))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(outcome) => {
            for note in &outcome.notes {
                eprintln!("note: {note}");
            }
            for path in &outcome.written {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
