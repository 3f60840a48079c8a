use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use simsr::commands;
use simsr::{CliError, RunConfig};

/// Behavioral metrics and SimSR representation learning on gridworlds.
///
/// Exit codes: 0 success, 2 validation error, 3 convergence failure, 4 I/O error.
#[derive(Debug, Parser)]
#[command(name = "simsr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration; omitted means all defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run a single seed (overrides `seeds` in the config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact fixed point of a metric operator.
    SolveMetric(Common),
    /// Train an encoder or a full agent on a gridworld.
    Train(Common),
    /// Compare learned cosine distances with the exact metric.
    EvalMetricQuality {
        #[command(flatten)]
        common: Common,
        /// Encoder checkpoint; without it a freshly initialized encoder is scored.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Frozen-encoder versus from-scratch agents on a moved goal.
    Transfer {
        #[command(flatten)]
        common: Common,
        /// Checkpoint holding the source encoder.
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn resolve(common: &Common) -> Result<(RunConfig, PathBuf), CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    let out = cfg.out.clone().ok_or_else(|| CliError::validation("no output directory: pass --out or set `out`"))?;
    if cfg.seeds.is_empty() {
        return Err(CliError::validation("`seeds` is empty"));
    }
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::SolveMetric(common) => {
            let (cfg, out) = resolve(&common)?;
            let r = commands::solve_metric(&cfg, &out)?;
            println!("{}: {} iterations, residual {:e}, max distance {}", r.operator, r.iterations, r.final_residual, r.max_distance);
        }
        Command::Train(common) => {
            let (cfg, out) = resolve(&common)?;
            for r in commands::train(&cfg, &out)? {
                println!(
                    "seed {}: {} steps, mean eval return {}, best value ratio {}, metric mae {}",
                    r.seed,
                    r.steps,
                    r.mean_eval_return,
                    r.best_value_ratio,
                    r.final_metric_mae.unwrap_or(f64::NAN)
                );
            }
        }
        Command::EvalMetricQuality { common, checkpoint } => {
            let (cfg, out) = resolve(&common)?;
            for r in commands::eval_metric_quality(&cfg, &out, checkpoint.as_deref())? {
                println!(
                    "seed {}: mae {}, max error {}, spearman {}, invariance gap {}",
                    r.seed,
                    r.mean_abs_error,
                    r.max_abs_error,
                    r.spearman.unwrap_or(f64::NAN),
                    r.invariance_gap
                );
            }
        }
        Command::Transfer { common, checkpoint } => {
            let (cfg, out) = resolve(&common)?;
            for r in commands::transfer(&cfg, &out, &checkpoint)? {
                let aucs: Vec<String> = r.arms.iter().map(|a| format!("{} {}", a.arm, a.auc)).collect();
                println!("seed {}: auc {}", r.seed, aucs.join(", "));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
