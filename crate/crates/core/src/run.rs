//! Training and evaluation loops.
//!
//! [`Trainer`] runs the full interaction loop: encode, act, record, sample,
//! then one representation step and (in agent mode) one critic and one actor
//! step per environment step. Records are handed to an [`Observer`], which
//! may stop the run early.

use alloc::vec::Vec;
use core::ops::ControlFlow;

use rand::Rng;

use crate::agent::{ActMode, AgentConfig, SimsrAgent};
use crate::buffer::{ReplayBuffer, DEFAULT_CAPACITY};
use crate::dynamics::DynamicsEnsemble;
use crate::encoder::{cos_distance, Encoder, EncoderPair, DEFAULT_HIDDEN, DEFAULT_LATENT_DIM};
use crate::env::{GridSpec, GridWorld};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{DistanceMatrix, Matrix};
use crate::mdp::{optimal_q, policy_value, greedy_policy, FiniteMdp, Policy};
use crate::metric::{default_max_iter, solve_fixed_point, FixedPointReport, OperatorKind, PolicyModel, DEFAULT_TOL};
use crate::observation::{Clock, ObservationEmitter};
use crate::rng::{derive_seed, seeded, SimRng};
use crate::simsr::{RepresentationLearner, TargetVariant, TrainConfig};
use crate::stats::spearman;

/// Seed streams derived from the run seed.
mod stream {
    pub const INIT: u64 = 0;
    pub const ENV: u64 = 1;
    pub const ACTION: u64 = 2;
    pub const SAMPLE: u64 = 3;
    pub const UPDATE: u64 = 4;
    pub const EVAL: u64 = 5;
    pub const DYNAMICS: u64 = 6;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Representation learning only, behind a uniform-random policy.
    EncoderOnly,
    /// Full agent: representation, critic and actor.
    Agent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    /// The normalized MLP encoder.
    Mlp { hidden: usize, latent: usize },
    /// Identity on the observation: a tabular representation on one-hot
    /// observations. Never trained.
    Tabular,
}

impl Default for EncoderKind {
    fn default() -> Self {
        EncoderKind::Mlp { hidden: DEFAULT_HIDDEN, latent: DEFAULT_LATENT_DIM }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    pub mode: RunMode,
    pub total_steps: u64,
    /// Uniform-random steps before the first update.
    pub initial_steps: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub buffer_capacity: usize,
    /// `0` disables checkpoints.
    pub checkpoint_every: u64,
    /// Stop at the first evaluation whose exact greedy value reaches this
    /// fraction of the optimal value.
    pub stop_at_value_ratio: Option<f64>,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            mode: RunMode::Agent,
            total_steps: 30_000,
            initial_steps: 1000,
            eval_every: 1000,
            eval_episodes: 10,
            buffer_capacity: DEFAULT_CAPACITY,
            checkpoint_every: 0,
            stop_at_value_ratio: None,
        }
    }
}

/// Everything needed to build a learner from scratch.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerSpec {
    pub encoder: EncoderKind,
    pub train: TrainConfig,
    pub dynamics_hidden: usize,
    pub agent: AgentConfig,
    pub train_encoder: bool,
}

impl Default for LearnerSpec {
    fn default() -> Self {
        Self {
            encoder: EncoderKind::default(),
            train: TrainConfig::default(),
            dynamics_hidden: 64,
            agent: AgentConfig::default(),
            train_encoder: true,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Learner {
    Encoder(RepresentationLearner),
    Agent(SimsrAgent),
}

impl Learner {
    pub fn representation(&self) -> &RepresentationLearner {
        match self {
            Learner::Encoder(l) => l,
            Learner::Agent(a) => &a.learner,
        }
    }

    pub fn representation_mut(&mut self) -> &mut RepresentationLearner {
        match self {
            Learner::Encoder(l) => l,
            Learner::Agent(a) => &mut a.learner,
        }
    }

    pub fn agent(&self) -> Option<&SimsrAgent> {
        match self {
            Learner::Agent(a) => Some(a),
            Learner::Encoder(_) => None,
        }
    }
}

/// Builds the representation learner, with a dynamics ensemble whenever the
/// latent-dynamics target needs one.
pub fn build_representation(spec: &LearnerSpec, obs_dim: usize, n_actions: usize, seed: u64) -> Result<RepresentationLearner> {
    let mut rng = seeded(derive_seed(seed, stream::INIT));
    let encoder = match spec.encoder {
        EncoderKind::Mlp { hidden, latent } => Encoder::new(&mut rng, obs_dim, hidden, latent),
        EncoderKind::Tabular => Encoder::identity(obs_dim),
    };
    let ensemble = match spec.train.target_variant {
        TargetVariant::LatentDynamics => Some(DynamicsEnsemble::new(
            encoder.latent_dim(),
            n_actions,
            spec.dynamics_hidden,
            spec.train.ensemble_size,
            derive_seed(seed, stream::DYNAMICS),
        )?),
        TargetVariant::ObservationSampling => None,
    };
    let pair = EncoderPair::new(encoder, spec.train.momentum)?;
    let mut learner = RepresentationLearner::new(pair, ensemble, spec.train.clone())?;
    learner.train_encoder = spec.train_encoder && spec.encoder != EncoderKind::Tabular;
    Ok(learner)
}

pub fn build_learner(spec: &LearnerSpec, mode: RunMode, obs_dim: usize, n_actions: usize, seed: u64) -> Result<Learner> {
    let rep = build_representation(spec, obs_dim, n_actions, seed)?;
    Ok(match mode {
        RunMode::EncoderOnly => Learner::Encoder(rep),
        RunMode::Agent => {
            let mut rng = seeded(derive_seed(derive_seed(seed, stream::INIT), 1));
            Learner::Agent(SimsrAgent::new(&mut rng, rep, n_actions, spec.agent.clone())?)
        }
    })
}

/// Learned distances compared against an exact fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricQuality {
    /// Over pairs `x < y`. The exact fixed point of the independent-coupling
    /// operator has nonzero self-distances that no cosine distance can
    /// represent, so the diagonal is left out.
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
    /// `None` when either side is constant.
    pub spearman: Option<f64>,
    /// Largest cosine distance between encodings of one state under
    /// different distractor frames.
    pub invariance_gap: f64,
    /// Phase-averaged learned distances between states.
    pub learned: DistanceMatrix,
}

/// Encodes every state under every representative distractor clock.
fn encode_states(encoder: &Encoder, emitter: &ObservationEmitter) -> Result<Vec<Vec<Vec<f64>>>> {
    let clocks = emitter.representative_clocks();
    (0..emitter.n_states())
        .map(|s| clocks.iter().map(|&c| encoder.encode(&emitter.emit(s, c))).collect())
        .collect()
}

fn distance(encoder: &Encoder, a: &[f64], b: &[f64]) -> Result<f64> {
    if encoder.is_normalized() {
        cos_distance(a, b)
    } else {
        Ok(1.0 - crate::linalg::dot(a, b))
    }
}

pub fn metric_quality(encoder: &Encoder, emitter: &ObservationEmitter, exact: &DistanceMatrix) -> Result<MetricQuality> {
    let n = emitter.n_states();
    check_dim("exact metric size", n, exact.n())?;
    check_dim("encoder input", emitter.obs_dim(), encoder.obs_dim())?;
    let z = encode_states(encoder, emitter)?;
    let phases = z[0].len();

    let mut learned = Matrix::zeros(n, n);
    let mut invariance_gap: f64 = 0.0;
    for x in 0..n {
        for p in 0..phases {
            for q in p + 1..phases {
                invariance_gap = invariance_gap.max(distance(encoder, &z[x][p], &z[x][q])?);
            }
        }
        for y in x + 1..n {
            let mut total = 0.0;
            for p in 0..phases {
                total += distance(encoder, &z[x][p], &z[y][p])?;
            }
            learned[(x, y)] = total / phases as f64;
            learned[(y, x)] = learned[(x, y)];
        }
    }

    let (mut a, mut b) = (Vec::new(), Vec::new());
    for x in 0..n {
        for y in x + 1..n {
            a.push(learned[(x, y)]);
            b.push(exact.get(x, y));
        }
    }
    let errors: Vec<f64> = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).collect();
    // Unnormalized features can give negative "distances"; clamp for storage.
    let learned = DistanceMatrix::new(learned.map(|v| v.max(0.0)))?;
    Ok(MetricQuality {
        max_abs_error: errors.iter().copied().fold(0.0, f64::max),
        mean_abs_error: crate::stats::mean(&errors),
        spearman: spearman(&a, &b),
        invariance_gap,
        learned,
    })
}

/// Exact independent-coupling fixed point under the uniform policy, the
/// reference for the encoder-only protocol.
pub fn uniform_policy_metric(mdp: &FiniteMdp, gamma: f64) -> Result<FixedPointReport> {
    let mdp = mdp.with_gamma(gamma)?;
    let pi = Policy::uniform(mdp.n_states(), mdp.n_actions());
    let spread = PolicyModel::new(&mdp, &pi)?.reward_spread();
    let max_iter = default_max_iter(gamma, spread, DEFAULT_TOL);
    solve_fixed_point(&mdp, &pi, OperatorKind::IndependentCoupling, DEFAULT_TOL, max_iter)
}

/// The agent's greedy action in every state, with the distractor frozen at `clock`.
pub fn greedy_state_policy(agent: &SimsrAgent, emitter: &ObservationEmitter, clock: Clock) -> Result<Policy> {
    let mut rng = seeded(0);
    let actions = (0..emitter.n_states())
        .map(|s| agent.act(&emitter.emit(s, clock), ActMode::Greedy, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Policy::deterministic(agent.critic.n_actions(), &actions)
}

/// Optimal discounted value of `state` and the greedy-optimal policy.
pub fn optimal_value(mdp: &FiniteMdp, state: usize) -> Result<(f64, Policy)> {
    let q = optimal_q(mdp, DEFAULT_TOL)?;
    let pi = greedy_policy(&q);
    let v = policy_value(mdp, &pi, DEFAULT_TOL)?.values[state];
    Ok((v, pi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub simsr_loss: f64,
    pub dynamics_loss: f64,
    pub mean_embedding_norm: f64,
    /// `NaN` in encoder-only mode.
    pub critic_loss: f64,
    pub actor_loss: f64,
    /// Mean absolute error to the exact metric; only on evaluation steps.
    pub metric_approx_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub episode: u64,
    /// Environment steps taken so far.
    pub step: u64,
    pub episode_return: f64,
    pub length: u64,
    /// Averages over the updates made during the episode; `NaN` if none.
    pub mean_q: f64,
    pub actor_entropy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRecord {
    pub step: u64,
    /// Mean undiscounted return of greedy episodes; `NaN` in encoder-only mode.
    pub mean_return: f64,
    /// Exact discounted value of the greedy state policy from the start state.
    pub greedy_value: f64,
    pub optimal_value: f64,
    pub metric_mae: f64,
    pub metric_spearman: f64,
}

impl EvalRecord {
    pub fn value_ratio(&self) -> f64 {
        self.greedy_value / self.optimal_value
    }
}

/// Receives records as they are produced. Returning `Break` ends the run.
pub trait Observer {
    fn on_step(&mut self, _record: &StepRecord) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
    fn on_episode(&mut self, _record: &EpisodeRecord) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
    fn on_eval(&mut self, _record: &EvalRecord) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
    fn on_checkpoint(&mut self, _step: u64, _learner: &Learner) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
}

/// Collects everything in memory.
#[derive(Debug, Clone, Default)]
pub struct Recorder {
    pub steps: Vec<StepRecord>,
    pub episodes: Vec<EpisodeRecord>,
    pub evals: Vec<EvalRecord>,
    pub checkpoints: Vec<u64>,
}

impl Observer for Recorder {
    fn on_step(&mut self, r: &StepRecord) -> ControlFlow<()> {
        self.steps.push(*r);
        ControlFlow::Continue(())
    }
    fn on_episode(&mut self, r: &EpisodeRecord) -> ControlFlow<()> {
        self.episodes.push(*r);
        ControlFlow::Continue(())
    }
    fn on_eval(&mut self, r: &EvalRecord) -> ControlFlow<()> {
        self.evals.push(*r);
        ControlFlow::Continue(())
    }
    fn on_checkpoint(&mut self, step: u64, _: &Learner) -> ControlFlow<()> {
        self.checkpoints.push(step);
        ControlFlow::Continue(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: u64,
    pub episodes: u64,
    pub stopped_early: bool,
    pub final_eval: Option<EvalRecord>,
    /// Mean of the evaluation returns, i.e. the area under the learning
    /// curve divided by its length.
    pub mean_eval_return: f64,
    pub best_value_ratio: f64,
}

/// One training run over a gridworld.
#[derive(Debug)]
pub struct Trainer {
    pub env: GridWorld,
    pub learner: Learner,
    pub buffer: ReplayBuffer,
    pub config: LoopConfig,
    exact: DistanceMatrix,
    optimal: f64,
    rngs: [SimRng; 5],
}

impl Trainer {
    pub fn new(grid: GridSpec, learner: Learner, config: LoopConfig, seed: u64) -> Result<Self> {
        if config.eval_every == 0 || config.total_steps == 0 {
            return Err(Error::Validation("total_steps and eval_every must be positive".into()));
        }
        let env = GridWorld::new(grid)?;
        let rep = learner.representation();
        check_dim("encoder input", env.obs_dim(), rep.pair.online.obs_dim())?;
        if let Learner::Agent(a) = &learner {
            check_dim("agent actions", env.n_actions(), a.critic.n_actions())?;
        }
        let gamma = match &learner {
            Learner::Agent(a) => a.config.gamma,
            Learner::Encoder(l) => l.config.gamma,
        };
        let exact = uniform_policy_metric(env.mdp(), rep.config.gamma)?.distances;
        let start = env.spec().index(env.spec().start);
        let optimal = optimal_value(&env.mdp().with_gamma(gamma)?, start)?.0;
        let rngs = [stream::ENV, stream::ACTION, stream::SAMPLE, stream::UPDATE, stream::EVAL].map(|s| seeded(derive_seed(seed, s)));
        Ok(Self { buffer: ReplayBuffer::new(config.buffer_capacity), env, learner, config, exact, optimal, rngs })
    }

    /// The exact metric the learned distances are compared against.
    pub fn exact_metric(&self) -> &DistanceMatrix {
        &self.exact
    }

    pub fn optimal_value(&self) -> f64 {
        self.optimal
    }

    pub fn metric_quality(&self) -> Result<MetricQuality> {
        metric_quality(&self.learner.representation().pair.online, self.env.emitter(), &self.exact)
    }

    /// Greedy episodes on a fresh copy of the environment plus the exact
    /// value of the greedy state policy.
    pub fn evaluate(&mut self, step: u64) -> Result<EvalRecord> {
        let quality = self.metric_quality()?;
        let (mut mean_return, mut greedy_value) = (f64::NAN, f64::NAN);
        if let Learner::Agent(agent) = &self.learner {
            let mut env = GridWorld::new(self.env.spec().clone())?;
            let rng = &mut self.rngs[4];
            let mut total = 0.0;
            for _ in 0..self.config.eval_episodes {
                let mut obs = env.reset();
                loop {
                    let t = env.step(agent.act(&obs, ActMode::Greedy, rng)?, rng)?;
                    total += t.reward;
                    if t.done {
                        break;
                    }
                    obs = t.next_obs;
                }
            }
            mean_return = total / self.config.eval_episodes.max(1) as f64;
            let clock = env.emitter().representative_clocks()[0];
            let pi = greedy_state_policy(agent, env.emitter(), clock)?;
            let mdp = env.mdp().with_gamma(agent.config.gamma)?;
            let start = env.spec().index(env.spec().start);
            greedy_value = policy_value(&mdp, &pi, DEFAULT_TOL)?.values[start];
        }
        Ok(EvalRecord {
            step,
            mean_return,
            greedy_value,
            optimal_value: self.optimal,
            metric_mae: quality.mean_abs_error,
            metric_spearman: quality.spearman.unwrap_or(f64::NAN),
        })
    }

    pub fn run(&mut self, observer: &mut dyn Observer) -> Result<RunSummary> {
        let cfg = self.config.clone();
        let mut obs = self.env.reset();
        let mut episode = 0u64;
        let (mut ep_return, mut ep_len) = (0.0, 0u64);
        let (mut ep_q, mut ep_entropy, mut ep_updates) = (0.0, 0.0, 0u64);
        let mut evals: Vec<EvalRecord> = Vec::new();
        let mut stopped_early = false;
        let mut steps = 0;

        for step in 1..=cfg.total_steps {
            steps = step;
            let random = cfg.mode == RunMode::EncoderOnly || step <= cfg.initial_steps;
            let action = match &self.learner {
                Learner::Agent(agent) if !random => agent.act(&obs, ActMode::Sample, &mut self.rngs[1])?,
                _ => self.rngs[1].random_range(0..self.env.n_actions()),
            };
            let t = self.env.step(action, &mut self.rngs[0])?;
            ep_return += t.reward;
            ep_len += 1;
            let done = t.done;
            obs = t.next_obs.clone();
            self.buffer.push(t);

            let mut stop = false;
            if step >= cfg.initial_steps {
                let batch_size = self.learner.representation().config.batch_size;
                let batch = self.buffer.sample_batch(batch_size, &mut self.rngs[2])?;
                let mut record = StepRecord {
                    step,
                    simsr_loss: f64::NAN,
                    dynamics_loss: f64::NAN,
                    mean_embedding_norm: f64::NAN,
                    critic_loss: f64::NAN,
                    actor_loss: f64::NAN,
                    metric_approx_error: None,
                };
                match &mut self.learner {
                    Learner::Encoder(l) => {
                        let m = l.train_step(&batch, &mut self.rngs[3])?;
                        record.simsr_loss = m.simsr_loss;
                        record.dynamics_loss = m.dynamics_loss;
                        record.mean_embedding_norm = m.mean_embedding_norm;
                    }
                    Learner::Agent(a) => {
                        let m = a.update(&batch, &mut self.rngs[3])?;
                        record.simsr_loss = m.representation.simsr_loss;
                        record.dynamics_loss = m.representation.dynamics_loss;
                        record.mean_embedding_norm = m.representation.mean_embedding_norm;
                        record.critic_loss = m.critic_loss;
                        record.actor_loss = m.actor_loss;
                        ep_q += m.mean_q;
                        ep_entropy += m.actor_entropy;
                        ep_updates += 1;
                    }
                }
                if step % cfg.eval_every == 0 {
                    record.metric_approx_error = Some(self.metric_quality()?.mean_abs_error);
                }
                stop |= observer.on_step(&record).is_break();
            }

            if done {
                let updates = ep_updates.max(1) as f64;
                let nan_if_none = |x: f64| if ep_updates == 0 { f64::NAN } else { x / updates };
                let record = EpisodeRecord {
                    episode,
                    step,
                    episode_return: ep_return,
                    length: ep_len,
                    mean_q: nan_if_none(ep_q),
                    actor_entropy: nan_if_none(ep_entropy),
                };
                stop |= observer.on_episode(&record).is_break();
                episode += 1;
                ep_return = 0.0;
                ep_len = 0;
                ep_q = 0.0;
                ep_entropy = 0.0;
                ep_updates = 0;
                obs = self.env.reset();
            }

            if step % cfg.eval_every == 0 {
                let record = self.evaluate(step)?;
                stop |= observer.on_eval(&record).is_break();
                if let Some(target) = cfg.stop_at_value_ratio {
                    if record.value_ratio() >= target {
                        stop = true;
                    }
                }
                evals.push(record);
            }
            if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 {
                stop |= observer.on_checkpoint(step, &self.learner).is_break();
            }
            if stop {
                stopped_early = step < cfg.total_steps;
                break;
            }
        }

        let returns: Vec<f64> = evals.iter().map(|e| e.mean_return).collect();
        Ok(RunSummary {
            steps,
            episodes: episode,
            stopped_early,
            final_eval: evals.last().copied(),
            mean_eval_return: crate::stats::mean(&returns),
            best_value_ratio: evals.iter().map(EvalRecord::value_ratio).fold(f64::NAN, f64::max),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observation::DistractorMode;
    use crate::simsr::LossKind;

    fn small_spec(variant: TargetVariant) -> LearnerSpec {
        LearnerSpec {
            encoder: EncoderKind::Mlp { hidden: 16, latent: 8 },
            train: TrainConfig { gamma: 0.5, batch_size: 16, learning_rate: 0.05, target_variant: variant, ensemble_size: 2, ..TrainConfig::default() },
            dynamics_hidden: 8,
            agent: AgentConfig { hidden: 16, gamma: 0.9, ..AgentConfig::default() },
            train_encoder: true,
        }
    }

    #[test]
    fn exact_metric_with_itself_is_perfect_off_diagonal() {
        let env = GridWorld::new(GridSpec::default()).unwrap();
        let exact = uniform_policy_metric(env.mdp(), 0.5).unwrap().distances;
        // An encoder whose cos distances are all 1: constant, so no rank correlation.
        let q = metric_quality(&Encoder::identity(9), env.emitter(), &exact).unwrap();
        assert!(q.spearman.is_none());
        assert_eq!(q.invariance_gap, 0.0);
        for x in 0..9 {
            for y in 0..9 {
                assert_eq!(q.learned.get(x, y), if x == y { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn identical_frames_add_nothing_to_the_invariance_gap() {
        let spec = GridSpec { distractor: DistractorMode::ScrollingPattern, ..GridSpec::default() };
        let env = GridWorld::new(spec).unwrap();
        let exact = uniform_policy_metric(env.mdp(), 0.5).unwrap().distances;
        // Identity on the clean channel only: ignores the distractor.
        let mut w = alloc::vec![0.0; 9 * 18];
        for i in 0..9 {
            w[i * 18 + i] = 1.0;
        }
        let layer = crate::nn::Linear::from_parts(18, 9, w, alloc::vec![0.0; 9]).unwrap();
        let enc = Encoder::from_mlp(crate::nn::Mlp::from_layers(alloc::vec![layer]).unwrap());
        assert_eq!(metric_quality(&enc, env.emitter(), &exact).unwrap().invariance_gap, 0.0);
        let raw = Encoder::identity(18);
        assert!(metric_quality(&raw, env.emitter(), &exact).unwrap().invariance_gap > 0.0);
    }

    #[test]
    fn smoke_runs_are_reproducible() {
        for (mode, variant) in [(RunMode::EncoderOnly, TargetVariant::ObservationSampling), (RunMode::Agent, TargetVariant::LatentDynamics)] {
            let run = || {
                let spec = small_spec(variant);
                let learner = build_learner(&spec, mode, 9, 4, 7).unwrap();
                let cfg = LoopConfig { mode, total_steps: 400, initial_steps: 100, eval_every: 100, eval_episodes: 2, checkpoint_every: 200, ..LoopConfig::default() };
                let mut trainer = Trainer::new(GridSpec { horizon: 50, ..GridSpec::default() }, learner, cfg, 7).unwrap();
                let mut rec = Recorder::default();
                let summary = trainer.run(&mut rec).unwrap();
                (rec, summary)
            };
            let (a, sa) = run();
            let (b, sb) = run();
            assert_eq!(alloc::format!("{:?}", a.steps), alloc::format!("{:?}", b.steps));
            assert_eq!(a.evals.len(), 4);
            assert_eq!(a.episodes.len(), 8);
            assert_eq!(a.checkpoints, [200, 400]);
            assert_eq!(a.steps.len(), 301);
            assert!(a.steps.iter().filter(|s| s.metric_approx_error.is_some()).count() == 4);
            assert_eq!(format_summary(&sa), format_summary(&sb));
        }
    }

    fn format_summary(s: &RunSummary) -> alloc::string::String {
        alloc::format!("{s:?}")
    }

    #[test]
    fn tabular_encoder_is_never_trained() {
        let spec = LearnerSpec { encoder: EncoderKind::Tabular, train: TrainConfig { loss_kind: LossKind::Mse, ..small_spec(TargetVariant::ObservationSampling).train }, ..small_spec(TargetVariant::ObservationSampling) };
        let learner = build_learner(&spec, RunMode::Agent, 9, 4, 1).unwrap();
        let before = learner.representation().pair.clone();
        let cfg = LoopConfig { total_steps: 200, initial_steps: 50, eval_every: 100, eval_episodes: 1, ..LoopConfig::default() };
        let mut trainer = Trainer::new(GridSpec::default(), learner, cfg, 1).unwrap();
        trainer.run(&mut Recorder::default()).unwrap();
        assert_eq!(trainer.learner.representation().pair, before);
    }
}
