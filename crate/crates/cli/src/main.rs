//! `eqprop`: train, evaluate and certify Equilibrium Propagation models.

mod commands;
mod config;
mod rundir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Overrides, RunConfig, Task};

#[derive(Parser)]
#[command(name = "eqprop", version, about = "Equilibrium Propagation with modern-Hopfield attention")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML file overlaid on the task preset.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory (default `runs/<command>`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Stratified cap on the number of samples per split.
    #[arg(long, global = true, value_name = "N")]
    limit: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    task: Option<Task>,
}

#[derive(Subcommand)]
enum Command {
    /// Train with EP and write metrics, checkpoint and config snapshot.
    Train {
        /// Print the resolved config and exit.
        #[arg(long)]
        dry_run: bool,
    },
    /// Evaluate a checkpoint on the task's test split.
    Eval {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
    },
    /// Compare EP and BPTT gradients on the toy suite over a β sweep.
    Gdu,
    /// Record φ and residual traces of free-phase relaxations.
    Converge {
        /// Relax a trained model on test samples instead of the toy suite.
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
    /// One-step retrieval of separable and clustered patterns against β_h.
    HopfieldDemo,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or config; exit code 2.
    Usage(String),
    /// Engine failure; exit code 1.
    Compute(eqprop_core::Error),
    /// The command ran but its checks did not hold; exit code 3.
    Check(String),
}

impl From<eqprop_core::Error> for CliError {
    fn from(e: eqprop_core::Error) -> Self {
        match e {
            eqprop_core::Error::Config { field, msg } => {
                CliError::Usage(format!("invalid config field `{field}`: {msg}"))
            }
            other => CliError::Compute(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Compute(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let flags = Overrides {
        task: cli.common.task,
        seed: cli.common.seed,
        out: cli.common.out,
        limit: cli.common.limit,
        threads: cli.common.threads,
    };
    let result = RunConfig::resolve(cli.common.config.as_deref(), &flags).and_then(|cfg| {
        commands::init_threads(cfg.threads)?;
        match cli.command {
            Command::Train { dry_run } => commands::train(&cfg, dry_run),
            Command::Eval { checkpoint } => commands::eval(&cfg, &checkpoint),
            Command::Gdu => commands::gdu(&cfg),
            Command::Converge { checkpoint } => commands::converge(&cfg, checkpoint.as_deref()),
            Command::HopfieldDemo => commands::hopfield_demo(&cfg),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Compute(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(CliError::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(3)
        }
    }
}
