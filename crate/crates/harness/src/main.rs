use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pebble_core::nn::Checkpoint;
use pebble_harness::{aggregate_normalized_score, evaluate, reference_returns, run_training, Agent, EvalPolicy, ExperimentConfig, HarnessError};

const LOG_ENV: &str = "PEBBLE_LOG_LEVEL";

#[derive(Parser)]
#[command(name = "pebble", about = "Train and inspect history-representation agents on gridworlds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent; writes logs and checkpoints to the output directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean return per task and normalized scores of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        episodes: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Probe probability maps and losses of a cube-room checkpoint.
    ProbeReport {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn init_logging() -> Result<(), HarnessError> {
    let level = std::env::var(LOG_ENV).unwrap_or_else(|_| "info".into());
    if !["error", "info", "debug"].contains(&level.as_str()) {
        return Err(HarnessError::Invalid(format!(
            "{LOG_ENV} must be one of error, info, debug; got {level:?}"
        )));
    }
    env_logger::Builder::new().parse_filters(&level).format_timestamp(None).init();
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    init_logging()?;
    match cli.command {
        Command::Train { config, seed, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let outcome = run_training(&cfg, seed, Some(&out))?;
            let t = &outcome.trainer;
            println!("frames {} updates {} episodes {}", t.frames, t.updates, t.episodes);
            for e in &outcome.last_report.entries {
                println!("{} {:.6e}", e.name, e.value);
            }
            if t.probe.is_some() {
                let s = t.probe_evaluation()?;
                println!("probe_loss {:.6e}", s.loss);
            }
        }
        Command::Eval {
            checkpoint,
            config,
            episodes,
            seed,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            let ck = Checkpoint::load(&checkpoint)?;
            // frozen projections are drawn from the training seed
            cfg.seed = ExperimentConfig::parse(&ck.config)?.seed;
            let mut agent = Agent::new(&cfg)?;
            agent.load(&ck)?;
            let a = evaluate(&cfg, EvalPolicy::Agent(&agent), episodes, seed)?;
            println!("task,mean_return");
            for (i, r) in a.iter().enumerate() {
                println!("{i},{r:.8e}");
            }
            if cfg.env.kind == pebble_harness::EnvKind::KeyDoor {
                let refs = reference_returns(&cfg, episodes, seed)?;
                let rows: Vec<_> = refs.iter().zip(&a).map(|(&(u, h), &x)| (u, h, x)).collect();
                let table = aggregate_normalized_score(&rows)?;
                println!("mean_normalized {:.4}", table.mean_normalized);
                println!("mean_capped {:.4}", table.mean_capped);
            }
        }
        Command::ProbeReport { checkpoint, out } => {
            let s = pebble_harness::probe_report::probe_report(&checkpoint, &out)?;
            println!("probe_loss {:.6e} over {} steps", s.loss, s.steps);
            match s.memory_loss {
                Some(l) => println!("memory_probe_loss {l:.6e} over {} steps", s.memory_steps),
                None => println!("memory_probe_loss n/a"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
