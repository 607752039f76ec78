use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uge_cli::{evaluate_all, generate, sweep, train_all, CliError, ExperimentConfig, RunOptions};

#[derive(Parser)]
#[command(name = "uge", version, about = "Unbiased graph embedding experiments")]
struct Cli {
    /// Replace existing output files.
    #[arg(long, global = true)]
    overwrite: bool,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic graph with planted attribute effects.
    Generate { config: PathBuf },
    /// Train embeddings for every configured regime.
    Train { config: PathBuf },
    /// Evaluate trained embeddings.
    Evaluate { config: PathBuf },
    /// Train and evaluate one regime over a grid of λ values.
    Sweep { config: PathBuf },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    }
    let opts = RunOptions {
        overwrite: cli.overwrite,
    };
    match cli.command {
        Command::Generate { config } => {
            let s = generate(&ExperimentConfig::load(config)?, opts)?;
            if s.clipped_pairs > 0 {
                log::warn!("{} pair probabilities were clipped at 1", s.clipped_pairs);
            }
        }
        Command::Train { config } => train_all(&ExperimentConfig::load(config)?, opts)?,
        Command::Evaluate { config } => {
            evaluate_all(&ExperimentConfig::load(config)?, opts)?;
        }
        Command::Sweep { config } => {
            sweep(&ExperimentConfig::load(config)?, opts)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
