use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use traji_agents::Variant;
use traji_cli::ais_cmd::{self, Stage};
use traji_cli::commands;
use traji_cli::config::{load, AgentKind, AisConfig, RunConfig};
use traji_cli::UsageError;

#[derive(Parser)]
#[command(name = "traji", version, about = "Trajectory imitation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AblationVariant {
    NoTime,
    NoReward,
    Original,
}

#[derive(Subcommand)]
enum Command {
    /// Sample members of a trajectory family as CSV plus an SVG overlay.
    Generate {
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train an agent on every configured seed.
    Train {
        #[arg(long, value_enum)]
        agent: Option<AgentKind>,
        #[arg(long)]
        config: PathBuf,
        /// Use seeds 0..k instead of the configured list.
        #[arg(long)]
        seeds: Option<u64>,
        /// Parallel training jobs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Evaluate checkpoints (files or run directories) on held-out references.
    Eval {
        #[arg(long, required = true, num_args = 1..)]
        checkpoint: Vec<PathBuf>,
        #[arg(long, default_value_t = 10)]
        refs: u64,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        /// Run config naming the task, for checkpoints that do not carry one.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate a layer ablation.
    Ablate {
        #[arg(long, value_enum)]
        variant: AblationVariant,
        #[arg(long)]
        config: PathBuf,
    },
    /// Vessel-traffic pipeline stages.
    Ais {
        #[arg(value_enum)]
        stage: Stage,
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { family, n, out, seed } => {
            let out = traji_cli::config::out_dir(Some(&out), "runs/generate");
            commands::generate(&family, n, &out, seed)
        }
        Command::Train { agent, config, seeds, jobs } => {
            let mut cfg: RunConfig = load(&config)?;
            if let Some(a) = agent {
                cfg.agent = a;
            }
            if let Some(k) = seeds {
                cfg.seeds = (0..k).collect();
            }
            let out = commands::train(cfg, jobs)?;
            log::info!("outputs in {}", out.display());
            Ok(())
        }
        Command::Eval { checkpoint, refs, seeds, config, out } => {
            commands::eval(&checkpoint, refs, seeds, config.as_deref(), out.as_deref()).map(|_| ())
        }
        Command::Ablate { variant, config } => {
            let v = match variant {
                AblationVariant::NoTime => Variant::NoTimeEmbedding,
                AblationVariant::NoReward => Variant::NoRewardReinforcement,
                AblationVariant::Original => Variant::Original,
            };
            commands::ablate_cmd(load(&config)?, v).map(|_| ())
        }
        Command::Ais { stage, config } => {
            let cfg: AisConfig = load(&config)?;
            ais_cmd::run(stage, cfg).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
