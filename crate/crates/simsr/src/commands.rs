//! The four subcommands. Each writes `resolved_config.toml` into the output
//! directory, then one set of files per seed.

use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use serde::Serialize;
use simsr_core::encoder::{Encoder, EncoderPair};
use simsr_core::env::{GridSpec, GridWorld};
use simsr_core::mdp::{greedy_policy, optimal_q, Policy};
use simsr_core::metric::{default_max_iter, solve_fixed_point, FixedPointReport, OperatorKind, PolicyModel};
use simsr_core::run::{
    build_learner, build_representation, metric_quality, uniform_policy_metric, EpisodeRecord, EvalRecord, Learner, MetricQuality,
    Observer, RunMode, RunSummary, StepRecord, Trainer,
};
use simsr_core::{DistanceMatrix, Error as CoreError};

use crate::checkpoint::Checkpoint;
use crate::config::{PolicyChoice, RunConfig};
use crate::error::{CliError, Result};
use crate::mdp_format;
use crate::output::{create_dir, opt_real, real, seeded_path, write_json, CsvFile};

pub const RESOLVED_CONFIG: &str = "resolved_config.toml";

pub const DISTANCES_HEADER: [&str; 3] = ["x", "y", "distance"];
pub const REPORT_HEADER: [&str; 6] = ["operator", "policy", "states", "iterations", "final_residual", "converged"];
pub const STEPS_HEADER: [&str; 7] =
    ["step", "simsr_loss", "dynamics_loss", "mean_embedding_norm", "critic_loss", "actor_loss", "metric_approx_error"];
pub const EPISODES_HEADER: [&str; 6] = ["episode", "step", "return", "length", "mean_q", "actor_entropy"];
pub const EVALS_HEADER: [&str; 7] =
    ["step", "mean_return", "greedy_value", "optimal_value", "value_ratio", "metric_mae", "metric_spearman"];
pub const QUALITY_HEADER: [&str; 4] = ["max_abs_error", "mean_abs_error", "spearman", "invariance_gap"];
pub const PAIRS_HEADER: [&str; 4] = ["x", "y", "learned", "exact"];
pub const CURVES_HEADER: [&str; 5] = ["arm", "step", "mean_return", "greedy_value", "optimal_value"];
pub const AUC_HEADER: [&str; 3] = ["arm", "auc", "final_mean_return"];

fn prepare(cfg: &RunConfig, out: &Path) -> Result<()> {
    create_dir(out)?;
    let path = out.join(RESOLVED_CONFIG);
    std::fs::write(&path, cfg.to_toml()).map_err(|e| CliError::io(path, e))
}

// ---- solve-metric ---------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOutcome {
    pub operator: &'static str,
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    pub max_distance: f64,
    #[serde(skip)]
    pub distances: Option<DistanceMatrix>,
}

pub fn solve_metric(cfg: &RunConfig, out: &Path) -> Result<SolveOutcome> {
    prepare(cfg, out)?;
    let mdp = match &cfg.mdp {
        Some(section) => mdp_format::read(&section.file)?,
        None => GridWorld::new(cfg.env.grid())?.mdp().clone(),
    };
    let mdp = if cfg.solver.gamma > 0.0 { mdp.with_gamma(cfg.solver.gamma)? } else { mdp };
    let s = &cfg.solver;
    let policy = match s.policy {
        PolicyChoice::Uniform => Policy::uniform(mdp.n_states(), mdp.n_actions()),
        PolicyChoice::Optimal => greedy_policy(&optimal_q(&mdp, s.tol)?),
    };
    let kind: OperatorKind = s.kind.into();
    let max_iter = match s.max_iter {
        0 => default_max_iter(mdp.gamma(), PolicyModel::new(&mdp, &policy)?.reward_spread(), s.tol),
        n => n,
    };
    let policy_name = match s.policy {
        PolicyChoice::Uniform => "uniform",
        PolicyChoice::Optimal => "optimal",
    };
    let mut report = CsvFile::create(out.join("report.csv"), &REPORT_HEADER)?;
    let row = |it: usize, res: f64, ok: bool| {
        [kind.name().to_string(), policy_name.into(), mdp.n_states().to_string(), it.to_string(), real(res), ok.to_string()]
    };
    let result = match solve_fixed_point(&mdp, &policy, kind, s.tol, max_iter) {
        Ok(r) => r,
        Err(CoreError::NotConverged { iterations, residual }) => {
            report.row(row(iterations, residual, false))?;
            report.finish()?;
            return Err(CliError::Convergence { iterations, residual });
        }
        Err(e) => return Err(e.into()),
    };
    let FixedPointReport { distances, iterations, final_residual } = result;
    report.row(row(iterations, final_residual, true))?;
    report.finish()?;
    write_distances(&out.join("distances.csv"), &distances)?;
    let outcome = SolveOutcome {
        operator: kind.name(),
        iterations,
        final_residual,
        converged: true,
        max_distance: distances.max_entry(),
        distances: Some(distances),
    };
    write_json(&out.join("summary.json"), &outcome)?;
    Ok(outcome)
}

fn write_distances(path: &Path, d: &DistanceMatrix) -> Result<()> {
    let mut csv = CsvFile::create(path, &DISTANCES_HEADER)?;
    for x in 0..d.n() {
        for y in 0..d.n() {
            csv.row([x.to_string(), y.to_string(), real(d.get(x, y))])?;
        }
    }
    csv.finish()
}

// ---- train ----------------------------------------------------------------

/// Streams records to CSV and checkpoints to disk.
struct FileObserver {
    steps: CsvFile,
    episodes: CsvFile,
    evals: CsvFile,
    checkpoint_dir: PathBuf,
    seed: u64,
    eval_records: Vec<EvalRecord>,
    checkpoints: Vec<PathBuf>,
    error: Option<CliError>,
}

impl FileObserver {
    fn guard(&mut self, r: Result<()>) -> ControlFlow<()> {
        match r {
            Ok(()) => ControlFlow::Continue(()),
            Err(e) => {
                self.error = Some(e);
                ControlFlow::Break(())
            }
        }
    }
}

impl Observer for FileObserver {
    fn on_step(&mut self, r: &StepRecord) -> ControlFlow<()> {
        let row = [
            r.step.to_string(),
            real(r.simsr_loss),
            real(r.dynamics_loss),
            real(r.mean_embedding_norm),
            real(r.critic_loss),
            real(r.actor_loss),
            opt_real(r.metric_approx_error),
        ];
        let res = self.steps.row(row);
        self.guard(res)
    }

    fn on_episode(&mut self, r: &EpisodeRecord) -> ControlFlow<()> {
        let row = [
            r.episode.to_string(),
            r.step.to_string(),
            real(r.episode_return),
            r.length.to_string(),
            real(r.mean_q),
            real(r.actor_entropy),
        ];
        let res = self.episodes.row(row);
        self.guard(res)
    }

    fn on_eval(&mut self, r: &EvalRecord) -> ControlFlow<()> {
        self.eval_records.push(*r);
        let res = self.evals.row(eval_row(r));
        self.guard(res)
    }

    fn on_checkpoint(&mut self, step: u64, learner: &Learner) -> ControlFlow<()> {
        let path = self.checkpoint_dir.join(format!("seed{}_step{step}.ckpt", self.seed));
        let res = Checkpoint::from_learner(learner, step).save(&path);
        self.checkpoints.push(path);
        self.guard(res)
    }
}

fn eval_row(r: &EvalRecord) -> [String; 7] {
    [
        r.step.to_string(),
        real(r.mean_return),
        real(r.greedy_value),
        real(r.optimal_value),
        real(r.value_ratio()),
        real(r.metric_mae),
        real(r.metric_spearman),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainOutcome {
    pub seed: u64,
    pub steps: u64,
    pub episodes: u64,
    pub stopped_early: bool,
    pub mean_eval_return: f64,
    pub best_value_ratio: f64,
    pub final_metric_mae: Option<f64>,
    pub final_metric_spearman: Option<f64>,
    pub final_invariance_gap: f64,
    pub final_checkpoint: PathBuf,
    pub checkpoints: Vec<PathBuf>,
    #[serde(skip)]
    pub evals: Vec<EvalRecord>,
    #[serde(skip)]
    pub quality: Option<MetricQuality>,
}

pub fn train(cfg: &RunConfig, out: &Path) -> Result<Vec<TrainOutcome>> {
    prepare(cfg, out)?;
    let ckpt_dir = out.join("checkpoints");
    create_dir(&ckpt_dir)?;
    let grid = cfg.env.grid();
    let mut outcomes = Vec::new();
    for &seed in &cfg.seeds {
        let (obs_dim, n_actions) = dims(&grid)?;
        let learner = build_learner(&cfg.learner_spec(), cfg.mode(), obs_dim, n_actions, seed)?;
        let mut trainer = Trainer::new(grid.clone(), learner, cfg.loop_config(), seed)?;
        let mut obs = FileObserver {
            steps: CsvFile::create(seeded_path(out, "steps", seed, "csv"), &STEPS_HEADER)?,
            episodes: CsvFile::create(seeded_path(out, "episodes", seed, "csv"), &EPISODES_HEADER)?,
            evals: CsvFile::create(seeded_path(out, "evals", seed, "csv"), &EVALS_HEADER)?,
            checkpoint_dir: ckpt_dir.clone(),
            seed,
            eval_records: Vec::new(),
            checkpoints: Vec::new(),
            error: None,
        };
        let summary = trainer.run(&mut obs);
        if let Some(e) = obs.error.take() {
            return Err(e);
        }
        let summary: RunSummary = summary?;
        let FileObserver { steps, episodes, evals, checkpoints, eval_records, .. } = obs;
        steps.finish()?;
        episodes.finish()?;
        evals.finish()?;
        let final_checkpoint = ckpt_dir.join(format!("final_seed{seed}.ckpt"));
        Checkpoint::from_learner(&trainer.learner, summary.steps).save(&final_checkpoint)?;
        let quality = trainer.metric_quality()?;
        let outcome = TrainOutcome {
            seed,
            steps: summary.steps,
            episodes: summary.episodes,
            stopped_early: summary.stopped_early,
            mean_eval_return: summary.mean_eval_return,
            best_value_ratio: summary.best_value_ratio,
            final_metric_mae: Some(quality.mean_abs_error),
            final_metric_spearman: quality.spearman,
            final_invariance_gap: quality.invariance_gap,
            final_checkpoint,
            checkpoints,
            evals: eval_records,
            quality: Some(quality),
        };
        write_json(&seeded_path(out, "summary", seed, "json"), &outcome)?;
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

fn dims(grid: &GridSpec) -> Result<(usize, usize)> {
    let env = GridWorld::new(grid.clone())?;
    Ok((env.obs_dim(), env.n_actions()))
}

// ---- eval-metric-quality --------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct QualityOutcome {
    pub seed: u64,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
    pub spearman: Option<f64>,
    pub invariance_gap: f64,
}

pub fn eval_metric_quality(cfg: &RunConfig, out: &Path, checkpoint: Option<&Path>) -> Result<Vec<QualityOutcome>> {
    prepare(cfg, out)?;
    let env = GridWorld::new(cfg.env.grid())?;
    let exact = uniform_policy_metric(env.mdp(), cfg.train.gamma)?.distances;
    let loaded = checkpoint.map(|p| Checkpoint::load(p)?.encoder()).transpose()?;
    let mut outcomes = Vec::new();
    for &seed in &cfg.seeds {
        let encoder = match &loaded {
            Some(e) => e.clone(),
            None => build_representation(&cfg.learner_spec(), env.obs_dim(), env.n_actions(), seed)?.pair.online,
        };
        if encoder.obs_dim() != env.obs_dim() {
            return Err(CliError::validation(format!(
                "encoder expects {} inputs but the environment emits {}",
                encoder.obs_dim(),
                env.obs_dim()
            )));
        }
        let q = metric_quality(&encoder, env.emitter(), &exact)?;
        let mut csv = CsvFile::create(seeded_path(out, "metric_quality", seed, "csv"), &QUALITY_HEADER)?;
        csv.row([real(q.max_abs_error), real(q.mean_abs_error), opt_real(q.spearman), real(q.invariance_gap)])?;
        csv.finish()?;
        let mut pairs = CsvFile::create(seeded_path(out, "distances", seed, "csv"), &PAIRS_HEADER)?;
        for x in 0..exact.n() {
            for y in 0..exact.n() {
                pairs.row([x.to_string(), y.to_string(), real(q.learned.get(x, y)), real(exact.get(x, y))])?;
            }
        }
        pairs.finish()?;
        write_embeddings(&seeded_path(out, "embeddings", seed, "csv"), &encoder, &env)?;
        let outcome = QualityOutcome {
            seed,
            max_abs_error: q.max_abs_error,
            mean_abs_error: q.mean_abs_error,
            spearman: q.spearman,
            invariance_gap: q.invariance_gap,
        };
        write_json(&seeded_path(out, "summary", seed, "json"), &outcome)?;
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

/// Raw embeddings: `state,phase,z0,…,z{d-1}`, one row per state and
/// representative distractor phase.
fn write_embeddings(path: &Path, encoder: &Encoder, env: &GridWorld) -> Result<()> {
    let d = encoder.latent_dim();
    let names: Vec<String> = ["state".to_string(), "phase".to_string()].into_iter().chain((0..d).map(|k| format!("z{k}"))).collect();
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut csv = CsvFile::create(path, &header)?;
    let emitter = env.emitter();
    for s in 0..emitter.n_states() {
        for (p, &clock) in emitter.representative_clocks().iter().enumerate() {
            let z = encoder.encode(&emitter.emit(s, clock))?;
            csv.row([s.to_string(), p.to_string()].into_iter().chain(z.into_iter().map(real)))?;
        }
    }
    csv.finish()
}

// ---- transfer -------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ArmOutcome {
    pub arm: &'static str,
    /// Mean evaluation return over the curve.
    pub auc: f64,
    pub final_mean_return: f64,
    #[serde(skip)]
    pub curve: Vec<EvalRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferOutcome {
    pub seed: u64,
    pub arms: Vec<ArmOutcome>,
    pub frozen_minus_scratch: f64,
}

impl TransferOutcome {
    pub fn arm(&self, name: &str) -> Option<&ArmOutcome> {
        self.arms.iter().find(|a| a.arm == name)
    }
}

/// Trains agents on the moved-goal task on top of the frozen checkpoint
/// encoder and from scratch, under the same seed and budget.
pub fn transfer(cfg: &RunConfig, out: &Path, checkpoint: &Path) -> Result<Vec<TransferOutcome>> {
    prepare(cfg, out)?;
    let source = Checkpoint::load(checkpoint)?.encoder()?;
    let source_grid = cfg.env.grid();
    let target_grid = GridSpec { goal: (cfg.transfer.goal[0], cfg.transfer.goal[1]), ..source_grid.clone() };
    let mut arms: Vec<(&'static str, &GridSpec, bool)> = vec![("frozen", &target_grid, true), ("scratch", &target_grid, false)];
    if cfg.transfer.control {
        arms.push(("control", &source_grid, true));
    }
    let spec = cfg.learner_spec();
    let mut loop_cfg = cfg.loop_config();
    loop_cfg.mode = RunMode::Agent;
    loop_cfg.stop_at_value_ratio = None;
    loop_cfg.checkpoint_every = 0;

    let mut outcomes = Vec::new();
    for &seed in &cfg.seeds {
        let mut curves = CsvFile::create(seeded_path(out, "transfer_curves", seed, "csv"), &CURVES_HEADER)?;
        let mut results = Vec::new();
        for &(arm, grid, frozen) in &arms {
            let (obs_dim, n_actions) = dims(grid)?;
            let mut learner = build_learner(&spec, RunMode::Agent, obs_dim, n_actions, seed)?;
            if frozen {
                freeze(&mut learner, &source)?;
            }
            let mut trainer = Trainer::new(grid.clone(), learner, loop_cfg.clone(), seed)?;
            let mut rec = simsr_core::run::Recorder::default();
            let summary = trainer.run(&mut rec)?;
            for e in &rec.evals {
                curves.row([arm.to_string(), e.step.to_string(), real(e.mean_return), real(e.greedy_value), real(e.optimal_value)])?;
            }
            results.push(ArmOutcome {
                arm,
                auc: summary.mean_eval_return,
                final_mean_return: rec.evals.last().map_or(f64::NAN, |e| e.mean_return),
                curve: rec.evals,
            });
        }
        curves.finish()?;
        let mut auc = CsvFile::create(seeded_path(out, "transfer_auc", seed, "csv"), &AUC_HEADER)?;
        for r in &results {
            auc.row([r.arm.to_string(), real(r.auc), real(r.final_mean_return)])?;
        }
        auc.finish()?;
        let outcome = TransferOutcome { seed, frozen_minus_scratch: results[0].auc - results[1].auc, arms: results };
        write_json(&seeded_path(out, "summary", seed, "json"), &outcome)?;
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

fn freeze(learner: &mut Learner, encoder: &Encoder) -> Result<()> {
    let rep = learner.representation_mut();
    let own = &rep.pair.online;
    if (own.obs_dim(), own.latent_dim()) != (encoder.obs_dim(), encoder.latent_dim()) {
        return Err(CliError::validation(format!(
            "checkpoint encoder maps {} -> {} but the config builds {} -> {}",
            encoder.obs_dim(),
            encoder.latent_dim(),
            own.obs_dim(),
            own.latent_dim()
        )));
    }
    rep.pair = EncoderPair::new(encoder.clone(), rep.pair.momentum())?;
    rep.train_encoder = false;
    Ok(())
}
