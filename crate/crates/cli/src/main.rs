use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uplift_cli::{run, Command, ExperimentConfig};

#[derive(Parser)]
#[command(name = "uplift", version, about = "Uplift modelling experiments on randomized trial data")]
struct Cli {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Write a synthetic dataset and its ground-truth effects.
    GenData,
    /// Compare methods by test AUUC or AUCC.
    Benchmark,
    /// AUUC as training labels are biased.
    BiasSweep,
    /// DRL AUUC as the plugged-in propensity is offset.
    PropSweep,
    /// DRL AUCC with constant versus forest nuisance models.
    OutcomeAblation,
    /// AUCC as the training set grows.
    Scaling,
    /// Budgeted allocation from DRL effect estimates.
    Allocate,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::GenData => Command::GenData,
            Sub::Benchmark => Command::Benchmark,
            Sub::BiasSweep => Command::BiasSweep,
            Sub::PropSweep => Command::PropSweep,
            Sub::OutcomeAblation => Command::OutcomeAblation,
            Sub::Scaling => Command::Scaling,
            Sub::Allocate => Command::Allocate,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => match ExperimentConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let cmd = Command::from(cli.command);
    match run(cmd, &cfg) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {} failed at {e}", cmd.name());
            ExitCode::FAILURE
        }
    }
}
