//! TOML run configuration.
//!
//! Every section is optional and every key has a default; unknown keys are
//! rejected. The fully resolved configuration is written next to the
//! outputs as `resolved_config.toml`, and running again from that file
//! reproduces the outputs byte for byte.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use simsr_core::agent::AgentConfig;
use simsr_core::env::GridSpec;
use simsr_core::metric::{OperatorKind, DEFAULT_TOL};
use simsr_core::observation::DistractorMode;
use simsr_core::optim::OptimizerKind;
use simsr_core::run::{EncoderKind, LearnerSpec, LoopConfig, RunMode};
use simsr_core::simsr::{LossKind, TargetVariant, TrainConfig};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// One run per seed. `--seed` replaces the list.
    pub seeds: Vec<u64>,
    /// Output directory; `--out` takes precedence.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// When set, `solve-metric` reads this MDP file instead of building the gridworld.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mdp: Option<MdpSection>,
    pub solver: SolverSection,
    pub env: EnvSection,
    pub encoder: EncoderSection,
    pub train: TrainSection,
    pub agent: AgentSection,
    #[serde(rename = "loop")]
    pub run: LoopSection,
    pub transfer: TransferSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0],
            out: None,
            mdp: None,
            solver: SolverSection::default(),
            env: EnvSection::default(),
            encoder: EncoderSection::default(),
            train: TrainSection::default(),
            agent: AgentSection::default(),
            run: LoopSection::default(),
            transfer: TransferSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpSection {
    /// Relative paths resolve against the config file's directory.
    pub file: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorChoice {
    Independent,
    Deterministic,
    Wasserstein,
}

impl From<OperatorChoice> for OperatorKind {
    fn from(c: OperatorChoice) -> Self {
        match c {
            OperatorChoice::Independent => OperatorKind::IndependentCoupling,
            OperatorChoice::Deterministic => OperatorKind::DeterministicBisim,
            OperatorChoice::Wasserstein => OperatorKind::WassersteinBisim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyChoice {
    Uniform,
    /// Greedy with respect to the optimal Q-function.
    Optimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub kind: OperatorChoice,
    pub policy: PolicyChoice,
    pub tol: f64,
    /// Iteration budget; `0` derives one from γ, the reward spread and `tol`.
    pub max_iter: usize,
    /// Overrides the discount stored in the MDP; `0` keeps it.
    pub gamma: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { kind: OperatorChoice::Independent, policy: PolicyChoice::Uniform, tol: DEFAULT_TOL, max_iter: 0, gamma: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistractorChoice {
    None,
    StaticNoise,
    ScrollingPattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    pub height: usize,
    pub width: usize,
    /// `[row, col]`.
    pub goal: [usize; 2],
    pub start: [usize; 2],
    pub reward_scale: f64,
    pub horizon: u64,
    /// Discount of the ground-truth MDP used by `solve-metric`.
    pub gamma: f64,
    pub distractor: DistractorChoice,
    pub distractor_seed: u64,
    pub scroll_period: u64,
}

impl Default for EnvSection {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            height: g.height,
            width: g.width,
            goal: [g.goal.0, g.goal.1],
            start: [g.start.0, g.start.1],
            reward_scale: g.reward_scale,
            horizon: g.horizon,
            gamma: g.gamma,
            distractor: DistractorChoice::None,
            distractor_seed: g.distractor_seed,
            scroll_period: g.scroll_period,
        }
    }
}

impl EnvSection {
    pub fn grid(&self) -> GridSpec {
        GridSpec {
            height: self.height,
            width: self.width,
            goal: (self.goal[0], self.goal[1]),
            start: (self.start[0], self.start[1]),
            reward_scale: self.reward_scale,
            horizon: self.horizon,
            gamma: self.gamma,
            distractor: match self.distractor {
                DistractorChoice::None => DistractorMode::None,
                DistractorChoice::StaticNoise => DistractorMode::StaticNoise,
                DistractorChoice::ScrollingPattern => DistractorMode::ScrollingPattern,
            },
            distractor_seed: self.distractor_seed,
            scroll_period: self.scroll_period,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderChoice {
    Mlp,
    /// Identity on one-hot observations; never trained.
    Tabular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSection {
    pub kind: EncoderChoice,
    pub hidden: usize,
    pub latent: usize,
}

impl Default for EncoderSection {
    fn default() -> Self {
        Self {
            kind: EncoderChoice::Mlp,
            hidden: simsr_core::encoder::DEFAULT_HIDDEN,
            latent: simsr_core::encoder::DEFAULT_LATENT_DIM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerChoice {
    Sgd,
    /// β = (0.9, 0.999), ε = 1e-8.
    Adam,
}

impl From<OptimizerChoice> for OptimizerKind {
    fn from(c: OptimizerChoice) -> Self {
        match c {
            OptimizerChoice::Sgd => OptimizerKind::Sgd,
            OptimizerChoice::Adam => OptimizerKind::ADAM_DEFAULT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossChoice {
    Mse,
    Huber,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetChoice {
    ObservationSampling,
    LatentDynamics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub gamma: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub loss: LossChoice,
    pub huber_delta: f64,
    pub target: TargetChoice,
    pub ensemble_size: usize,
    pub dynamics_hidden: usize,
    pub optimizer: OptimizerChoice,
    pub train_encoder: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        let spec = LearnerSpec::default();
        Self {
            gamma: t.gamma,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            momentum: t.momentum,
            loss: LossChoice::Huber,
            huber_delta: t.huber_delta,
            target: TargetChoice::LatentDynamics,
            ensemble_size: t.ensemble_size,
            dynamics_hidden: spec.dynamics_hidden,
            optimizer: OptimizerChoice::Sgd,
            train_encoder: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSection {
    pub gamma: f64,
    pub alpha: f64,
    pub q_tau: f64,
    pub target_period: u64,
    pub critic_lr: f64,
    pub actor_lr: f64,
    pub hidden: usize,
    pub huber_delta: f64,
    pub optimizer: OptimizerChoice,
}

impl Default for AgentSection {
    fn default() -> Self {
        let a = AgentConfig::default();
        Self {
            gamma: a.gamma,
            alpha: a.alpha,
            q_tau: a.q_tau,
            target_period: a.target_period,
            critic_lr: a.critic_lr,
            actor_lr: a.actor_lr,
            hidden: a.hidden,
            huber_delta: a.huber_delta,
            optimizer: OptimizerChoice::Sgd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeChoice {
    Agent,
    /// Representation learning behind a uniform-random policy.
    EncoderOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoopSection {
    pub mode: ModeChoice,
    pub total_steps: u64,
    pub initial_steps: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub buffer_capacity: usize,
    /// `0` disables periodic checkpoints; a final one is always written.
    pub checkpoint_every: u64,
    /// Stop once the greedy policy reaches this fraction of the optimal
    /// value; `0` never stops early.
    pub stop_at_value_ratio: f64,
}

impl Default for LoopSection {
    fn default() -> Self {
        let l = LoopConfig::default();
        Self {
            mode: ModeChoice::Agent,
            total_steps: l.total_steps,
            initial_steps: l.initial_steps,
            eval_every: l.eval_every,
            eval_episodes: l.eval_episodes,
            buffer_capacity: l.buffer_capacity,
            checkpoint_every: l.checkpoint_every,
            stop_at_value_ratio: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransferSection {
    /// Goal cell of the target task, `[row, col]`.
    pub goal: [usize; 2],
    /// Also train a frozen-encoder agent on the source task itself.
    pub control: bool,
}

impl Default for TransferSection {
    fn default() -> Self {
        Self { goal: [0, 2], control: true }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::validation(format!("config: {}", e.message())))
    }

    /// Reads a config file and resolves the MDP path against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(mdp) = &mut cfg.mdp {
            if mdp.file.is_relative() {
                if let Some(dir) = path.parent() {
                    mdp.file = dir.join(&mdp.file);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn learner_spec(&self) -> LearnerSpec {
        let t = &self.train;
        let a = &self.agent;
        LearnerSpec {
            encoder: match self.encoder.kind {
                EncoderChoice::Mlp => EncoderKind::Mlp { hidden: self.encoder.hidden, latent: self.encoder.latent },
                EncoderChoice::Tabular => EncoderKind::Tabular,
            },
            train: TrainConfig {
                gamma: t.gamma,
                batch_size: t.batch_size,
                learning_rate: t.learning_rate,
                momentum: t.momentum,
                loss_kind: match t.loss {
                    LossChoice::Mse => LossKind::Mse,
                    LossChoice::Huber => LossKind::Huber,
                },
                huber_delta: t.huber_delta,
                target_variant: match t.target {
                    TargetChoice::ObservationSampling => TargetVariant::ObservationSampling,
                    TargetChoice::LatentDynamics => TargetVariant::LatentDynamics,
                },
                ensemble_size: t.ensemble_size,
                optimizer: t.optimizer.into(),
            },
            dynamics_hidden: t.dynamics_hidden,
            agent: AgentConfig {
                gamma: a.gamma,
                alpha: a.alpha,
                q_tau: a.q_tau,
                target_period: a.target_period,
                critic_lr: a.critic_lr,
                actor_lr: a.actor_lr,
                hidden: a.hidden,
                huber_delta: a.huber_delta,
                optimizer: a.optimizer.into(),
            },
            train_encoder: t.train_encoder,
        }
    }

    pub fn mode(&self) -> RunMode {
        match self.run.mode {
            ModeChoice::Agent => RunMode::Agent,
            ModeChoice::EncoderOnly => RunMode::EncoderOnly,
        }
    }

    pub fn loop_config(&self) -> LoopConfig {
        let l = &self.run;
        LoopConfig {
            mode: self.mode(),
            total_steps: l.total_steps,
            initial_steps: l.initial_steps,
            eval_every: l.eval_every,
            eval_episodes: l.eval_episodes,
            buffer_capacity: l.buffer_capacity,
            checkpoint_every: l.checkpoint_every,
            stop_at_value_ratio: (l.stop_at_value_ratio > 0.0).then_some(l.stop_at_value_ratio),
        }
    }
}
