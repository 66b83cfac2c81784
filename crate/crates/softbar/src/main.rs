use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use softbar::experiments::{run_longrun, run_rollout, run_train, run_transfer, LongrunOptions};
use softbar::{ExperimentConfig, HarnessError};
use tracing_subscriber::EnvFilter;

#[derive(Debug, Parser)]
#[command(name = "softbar", version, about = "Compliant five-bar knob-turning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `run.output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a policy.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Train on two materials and evaluate every policy on both.
    Transfer {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "tpu,silicone")]
        materials: Vec<String>,
        /// Evaluation episodes per cell; defaults to `run.trials`.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Record per-step traces of a policy, or of random actions.
    Rollout {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Defaults to `run.episodes`.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Run the segmented long-run protocol under scheduled drift.
    Longrun {
        #[command(flatten)]
        common: Common,
        /// Divide segment lengths and cooldown by this factor.
        #[arg(long, default_value_t = 1)]
        scale: u64,
        /// Count steps and downtime without simulating.
        #[arg(long)]
        dry_run: bool,
        /// Act greedily with this policy instead of at random.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), HarnessError> {
    let mut config = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.run.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| config.run.output_dir.clone());
    Ok((config, out))
}

fn run(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Train { common } => {
            let (config, out) = load(&common)?;
            run_train(&config, &out)?;
        }
        Command::Transfer {
            common,
            materials,
            trials,
        } => {
            let (config, out) = load(&common)?;
            run_transfer(&config, &materials, trials.unwrap_or(config.run.trials), &out)?;
        }
        Command::Rollout {
            common,
            policy,
            episodes,
        } => {
            let (config, out) = load(&common)?;
            run_rollout(
                &config,
                policy.as_deref(),
                episodes.unwrap_or(config.run.episodes),
                &out,
            )?;
        }
        Command::Longrun {
            common,
            scale,
            dry_run,
            policy,
        } => {
            let (config, out) = load(&common)?;
            let options = LongrunOptions { scale, dry_run, policy };
            run_longrun(&config, &options, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let filter = std::env::var("SOFTBAR_LOG")
        .ok()
        .and_then(|v| EnvFilter::try_new(v).ok())
        .unwrap_or_else(|| EnvFilter::new("warn"));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.one_line());
            ExitCode::FAILURE
        }
    }
}
