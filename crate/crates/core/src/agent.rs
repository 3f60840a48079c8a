//! Discrete-action soft actor-critic on top of the shared encoder.

use alloc::vec::Vec;

use rand::Rng;

use crate::buffer::Batch;
use crate::encoder::{Encoder, EncoderPair};
use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::mdp::argmax;
use crate::nn::Mlp;
use crate::optim::{Optimizer, OptimizerKind};
use crate::rng::categorical;
use crate::simsr::{RepresentationLearner, StepMetrics};

pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_Q_TAU: f64 = 0.01;
pub const DEFAULT_TARGET_PERIOD: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub gamma: f64,
    /// Fixed entropy temperature.
    pub alpha: f64,
    /// Critic target EMA coefficient: `target ← (1 − τ) target + τ online`.
    pub q_tau: f64,
    /// Critic targets move once every this many updates.
    pub target_period: u64,
    pub critic_lr: f64,
    pub actor_lr: f64,
    pub hidden: usize,
    pub huber_delta: f64,
    pub optimizer: OptimizerKind,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            alpha: DEFAULT_ALPHA,
            q_tau: DEFAULT_Q_TAU,
            target_period: DEFAULT_TARGET_PERIOD,
            critic_lr: 1e-3,
            actor_lr: 1e-3,
            hidden: 64,
            huber_delta: 1.0,
            optimizer: OptimizerKind::Sgd,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma >= 0.0
            && self.gamma < 1.0
            && self.alpha >= 0.0
            && self.q_tau > 0.0
            && self.q_tau <= 1.0
            && self.target_period > 0
            && self.critic_lr >= 0.0
            && self.actor_lr >= 0.0
            && self.hidden > 0
            && self.huber_delta > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(alloc::format!("invalid agent settings: {self:?}")))
        }
    }
}

/// Numerically stable `log softmax` of each row.
pub fn log_softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + libm::log(row.iter().map(|&x| libm::exp(x - m)).sum::<f64>());
        row.iter_mut().for_each(|x| *x -= lse);
    }
    out
}

fn huber(e: f64, delta: f64) -> (f64, f64) {
    if e.abs() <= delta {
        (0.5 * e * e, e)
    } else {
        (delta * (e.abs() - 0.5 * delta), delta * e.signum())
    }
}

/// Twin Q-networks and their slow-moving copies.
#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
}

impl Critic {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, latent_dim: usize, hidden: usize, n_actions: usize) -> Self {
        let sizes = [latent_dim, hidden, hidden, n_actions];
        let q1 = Mlp::new(rng, &sizes);
        let q2 = Mlp::new(rng, &sizes);
        Self { q1_target: q1.clone(), q2_target: q2.clone(), q1, q2 }
    }

    pub fn from_parts(q1: Mlp, q2: Mlp, q1_target: Mlp, q2_target: Mlp) -> Result<Self> {
        if !(q1.same_shape(&q2) && q1.same_shape(&q1_target) && q1.same_shape(&q2_target)) {
            return Err(Error::Validation("critic networks differ in shape".into()));
        }
        Ok(Self { q1, q2, q1_target, q2_target })
    }

    pub fn n_actions(&self) -> usize {
        self.q1.out_dim()
    }

    /// Elementwise `min(Q1, Q2)`.
    pub fn q_min(&self, latents: &Matrix) -> Result<Matrix> {
        min_of(&self.q1.predict_batch(latents)?, &self.q2.predict_batch(latents)?)
    }

    fn target_min(&self, latents: &Matrix) -> Result<Matrix> {
        min_of(&self.q1_target.predict_batch(latents)?, &self.q2_target.predict_batch(latents)?)
    }

    /// `target ← (1 − τ) target + τ online` for both heads.
    pub fn soft_update(&mut self, tau: f64) {
        for (t, o) in [(&mut self.q1_target, &self.q1), (&mut self.q2_target, &self.q2)] {
            for (tb, ob) in t.blocks_mut().into_iter().zip(o.blocks()) {
                for (x, &y) in tb.iter_mut().zip(ob) {
                    *x = (1.0 - tau) * *x + tau * y;
                }
            }
        }
    }
}

fn min_of(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let data = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x.min(*y)).collect();
    Matrix::from_vec(a.rows(), a.cols(), data)
}

/// Policy network producing action logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    pub net: Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    Sample,
    Greedy,
}

impl Actor {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, latent_dim: usize, hidden: usize, n_actions: usize) -> Self {
        Self { net: Mlp::new(rng, &[latent_dim, hidden, hidden, n_actions]) }
    }

    pub fn n_actions(&self) -> usize {
        self.net.out_dim()
    }

    pub fn logits(&self, latent: &[f64]) -> Result<Vec<f64>> {
        self.net.forward(latent)
    }

    pub fn probs(&self, latent: &[f64]) -> Result<Vec<f64>> {
        let logits = self.logits(latent)?;
        let l = Matrix::from_vec(1, logits.len(), logits)?;
        Ok(log_softmax(&l).as_slice().iter().map(|&x| libm::exp(x)).collect())
    }

    /// Samples from `softmax(logits)` or takes the lowest-index argmax.
    /// The temperature only enters the losses.
    pub fn act<R: Rng + ?Sized>(&self, latent: &[f64], mode: ActMode, rng: &mut R) -> Result<usize> {
        match mode {
            ActMode::Greedy => Ok(argmax(&self.logits(latent)?)),
            ActMode::Sample => Ok(categorical(rng, &self.probs(latent)?)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CriticOutput {
    /// Sum of both heads' mean Huber losses.
    pub loss: f64,
    pub mean_q: f64,
    pub q1: Mlp,
    pub q2: Mlp,
    /// Gradient for the online encoder.
    pub encoder: Mlp,
    pub targets: Vec<f64>,
}

/// The soft Bellman target `r + γ Σ_a' π(a'|s') [min Q̂(s', a') − α log π(a'|s')]`
/// with next latents from the momentum encoder.
pub fn critic_targets(critic: &Critic, actor: &Actor, target_encoder: &Encoder, batch: &Batch, gamma: f64, alpha: f64) -> Result<Vec<f64>> {
    let next = target_encoder.encode_batch(&batch.next_obs)?;
    let q_next = critic.target_min(&next)?;
    let logp = log_softmax(&actor.net.predict_batch(&next)?);
    Ok((0..batch.len())
        .map(|i| {
            let soft_v: f64 = q_next
                .row(i)
                .iter()
                .zip(logp.row(i))
                .map(|(&q, &lp)| libm::exp(lp) * (q - alpha * lp))
                .sum();
            batch.rewards[i] + gamma * soft_v
        })
        .collect())
}

/// Huber loss of both heads against the shared target, with gradients for
/// both heads and for the online encoder.
pub fn critic_loss(critic: &Critic, encoder: &Encoder, batch: &Batch, targets: &[f64], huber_delta: f64) -> Result<CriticOutput> {
    if batch.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    check_dim("critic targets", batch.len(), targets.len())?;
    let n_actions = critic.n_actions();
    let (z, enc_cache) = encoder.forward(&batch.obs)?;
    let (q1, c1) = critic.q1.forward_batch(&z)?;
    let (q2, c2) = critic.q2.forward_batch(&z)?;
    let b = batch.len() as f64;
    let mut g1 = Matrix::zeros(batch.len(), n_actions);
    let mut g2 = Matrix::zeros(batch.len(), n_actions);
    let mut loss = 0.0;
    let mut q_sum = 0.0;
    for (i, &a) in batch.actions.iter().enumerate() {
        if a >= n_actions {
            return Err(Error::InvalidAction { action: a, n_actions });
        }
        let (l1, d1) = huber(q1[(i, a)] - targets[i], huber_delta);
        let (l2, d2) = huber(q2[(i, a)] - targets[i], huber_delta);
        loss += (l1 + l2) / b;
        q_sum += 0.5 * (q1[(i, a)] + q2[(i, a)]);
        g1[(i, a)] = d1 / b;
        g2[(i, a)] = d2 / b;
    }
    let (gq1, gz1) = critic.q1.backward(&c1, &g1)?;
    let (gq2, gz2) = critic.q2.backward(&c2, &g2)?;
    let mut gz = gz1;
    for (x, y) in gz.as_mut_slice().iter_mut().zip(gz2.as_slice()) {
        *x += y;
    }
    let enc = encoder.backward(&enc_cache, &gz)?;
    Ok(CriticOutput { loss, mean_q: q_sum / b, q1: gq1, q2: gq2, encoder: enc, targets: targets.to_vec() })
}

#[derive(Debug, Clone)]
pub struct ActorOutput {
    pub loss: f64,
    /// Mean policy entropy over the batch.
    pub entropy: f64,
    pub grads: Mlp,
}

/// `mean_s Σ_a π(a|s) [α log π(a|s) − min Q(s, a)]` on detached latents.
///
/// With `f = α log π − Q_min` the logit gradient is `π_b (f_b − Σ_a π_a f_a)`;
/// the `α` term of `∂ log π` cancels in expectation.
pub fn actor_loss(actor: &Actor, critic: &Critic, latents: &Matrix, alpha: f64) -> Result<ActorOutput> {
    if latents.rows() == 0 {
        return Err(Error::EmptyBuffer);
    }
    let q = critic.q_min(latents)?;
    let (logits, cache) = actor.net.forward_batch(latents)?;
    let logp = log_softmax(&logits);
    let b = latents.rows() as f64;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let (mut loss, mut entropy) = (0.0, 0.0);
    for i in 0..logits.rows() {
        let lp = logp.row(i);
        let p: Vec<f64> = lp.iter().map(|&x| libm::exp(x)).collect();
        let f: Vec<f64> = lp.iter().zip(q.row(i)).map(|(&l, &qv)| alpha * l - qv).collect();
        let mean_f: f64 = p.iter().zip(&f).map(|(a, b)| a * b).sum();
        loss += mean_f / b;
        entropy -= p.iter().zip(lp).map(|(a, b)| a * b).sum::<f64>() / b;
        for (j, g) in grad.row_mut(i).iter_mut().enumerate() {
            *g = p[j] * (f[j] - mean_f) / b;
        }
    }
    let grads = actor.net.backward(&cache, &grad)?.0;
    Ok(ActorOutput { loss, entropy, grads })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateMetrics {
    pub representation: StepMetrics,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub mean_q: f64,
    pub actor_entropy: f64,
}

/// Encoder, dynamics, critic and actor trained together, in that order.
#[derive(Debug, Clone)]
pub struct SimsrAgent {
    pub learner: RepresentationLearner,
    pub critic: Critic,
    pub actor: Actor,
    pub config: AgentConfig,
    q1_opt: Optimizer,
    q2_opt: Optimizer,
    actor_opt: Optimizer,
    updates: u64,
}

impl SimsrAgent {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, learner: RepresentationLearner, n_actions: usize, config: AgentConfig) -> Result<Self> {
        config.validate()?;
        let latent = learner.pair.online.latent_dim();
        let critic = Critic::new(rng, latent, config.hidden, n_actions);
        let actor = Actor::new(rng, latent, config.hidden, n_actions);
        Self::from_parts(learner, critic, actor, config)
    }

    pub fn from_parts(learner: RepresentationLearner, critic: Critic, actor: Actor, config: AgentConfig) -> Result<Self> {
        config.validate()?;
        let latent = learner.pair.online.latent_dim();
        check_dim("critic input", latent, critic.q1.in_dim())?;
        check_dim("actor input", latent, actor.net.in_dim())?;
        check_dim("actor actions", critic.n_actions(), actor.n_actions())?;
        Ok(Self {
            q1_opt: Optimizer::new(config.optimizer, config.critic_lr),
            q2_opt: Optimizer::new(config.optimizer, config.critic_lr),
            actor_opt: Optimizer::new(config.optimizer, config.actor_lr),
            learner,
            critic,
            actor,
            config,
            updates: 0,
        })
    }

    pub fn pair(&self) -> &EncoderPair {
        &self.learner.pair
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Encodes one observation with the online encoder and picks an action.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], mode: ActMode, rng: &mut R) -> Result<usize> {
        let z = self.learner.pair.online.encode(obs)?;
        self.actor.act(&z, mode, rng)
    }

    pub fn update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<UpdateMetrics> {
        let representation = self.learner.train_step(batch, rng)?;

        let cfg = &self.config;
        let targets = critic_targets(&self.critic, &self.actor, &self.learner.pair.target, batch, cfg.gamma, cfg.alpha)?;
        let c = critic_loss(&self.critic, &self.learner.pair.online, batch, &targets, cfg.huber_delta)?;
        self.q1_opt.step(&mut self.critic.q1, &c.q1);
        self.q2_opt.step(&mut self.critic.q2, &c.q2);
        self.learner.apply_encoder_gradient(&c.encoder);

        // The actor sees detached latents: its loss never reaches the encoder.
        let z = self.learner.pair.online.encode_batch(&batch.obs)?;
        let a = actor_loss(&self.actor, &self.critic, &z, cfg.alpha)?;
        self.actor_opt.step(&mut self.actor.net, &a.grads);

        self.updates += 1;
        if self.updates % cfg.target_period == 0 {
            self.critic.soft_update(cfg.q_tau);
        }
        Ok(UpdateMetrics {
            representation,
            critic_loss: c.loss,
            actor_loss: a.loss,
            mean_q: c.mean_q,
            actor_entropy: a.entropy,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Transition;
    use crate::rng::seeded;
    use crate::simsr::{TargetVariant, TrainConfig};
    use alloc::vec;

    fn random_batch(rng: &mut impl Rng, n: usize, obs_dim: usize, n_actions: usize) -> Batch {
        let ts: Vec<Transition> = (0..n)
            .map(|_| Transition {
                obs: (0..obs_dim).map(|_| rng.random::<f64>()).collect(),
                action: rng.random_range(0..n_actions),
                reward: rng.random::<f64>(),
                next_obs: (0..obs_dim).map(|_| rng.random::<f64>()).collect(),
                done: false,
            })
            .collect();
        Batch::from_transitions(&ts).unwrap()
    }

    fn fixed_logits(values: &[f64]) -> Actor {
        let n = values.len();
        let layer = crate::nn::Linear::from_parts(1, n, vec![0.0; n], values.to_vec()).unwrap();
        Actor { net: Mlp::from_layers(vec![layer]).unwrap() }
    }

    #[test]
    fn greedy_and_sampling_examples() {
        let mut rng = seeded(0);
        assert_eq!(fixed_logits(&[1.0, 0.0]).act(&[1.0], ActMode::Greedy, &mut rng).unwrap(), 0);
        assert_eq!(fixed_logits(&[0.3, 0.3]).act(&[1.0], ActMode::Greedy, &mut rng).unwrap(), 0);
        assert_eq!(fixed_logits(&[0.1, 2.0, 0.5]).act(&[1.0], ActMode::Greedy, &mut rng).unwrap(), 1);
        assert_eq!(fixed_logits(&[100.1, 102.0, 100.5]).act(&[1.0], ActMode::Greedy, &mut rng).unwrap(), 1);

        let even = fixed_logits(&[0.0, 0.0]);
        let n = 100_000;
        let ones = (0..n).filter(|_| even.act(&[1.0], ActMode::Sample, &mut rng).unwrap() == 1).count();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn myopic_target_is_the_reward() {
        let mut rng = seeded(1);
        let critic = Critic::new(&mut rng, 4, 8, 3);
        let actor = Actor::new(&mut rng, 4, 8, 3);
        let enc = Encoder::new(&mut rng, 5, 8, 4);
        let batch = random_batch(&mut rng, 7, 5, 3);
        assert_eq!(critic_targets(&critic, &actor, &enc, &batch, 0.0, 0.0).unwrap(), batch.rewards);
    }

    #[test]
    fn identical_twins_get_identical_gradients() {
        let mut rng = seeded(2);
        let q = Mlp::new(&mut rng, &[4, 8, 8, 3]);
        let critic = Critic::from_parts(q.clone(), q.clone(), q.clone(), q).unwrap();
        let enc = Encoder::new(&mut rng, 5, 8, 4);
        let batch = random_batch(&mut rng, 6, 5, 3);
        let out = critic_loss(&critic, &enc, &batch, &batch.rewards, 1.0).unwrap();
        assert_eq!(out.q1, out.q2);
    }

    #[test]
    fn uniform_q_keeps_the_uniform_policy_optimal() {
        let q_layer = crate::nn::Linear::from_parts(2, 4, vec![0.0; 8], vec![1.5; 4]).unwrap();
        let q = Mlp::from_layers(vec![q_layer]).unwrap();
        let critic = Critic::from_parts(q.clone(), q.clone(), q.clone(), q).unwrap();
        let actor = Actor { net: Mlp::from_layers(vec![crate::nn::Linear::zeros(2, 4)]).unwrap() };
        let z = Matrix::from_rows(&[[0.6, 0.8], [1.0, 0.0]]).unwrap();
        let out = actor_loss(&actor, &critic, &z, 0.1).unwrap();
        assert!((out.entropy - libm::log(4.0)).abs() < 1e-12);
        assert!(out.grads.flat_params().iter().all(|g| g.abs() < 1e-15));
    }

    #[test]
    fn actor_moves_toward_the_better_action() {
        let q_layer = crate::nn::Linear::from_parts(1, 2, vec![0.0; 2], vec![0.0, 1.0]).unwrap();
        let q = Mlp::from_layers(vec![q_layer]).unwrap();
        let critic = Critic::from_parts(q.clone(), q.clone(), q.clone(), q).unwrap();
        let mut actor = fixed_logits(&[0.2, 0.0]);
        let z = Matrix::from_rows(&[[1.0]]).unwrap();
        let before = actor.probs(&[1.0]).unwrap()[1];
        let out = actor_loss(&actor, &critic, &z, 0.0).unwrap();
        actor.net.add_scaled(&out.grads, -0.5);
        assert!(actor.probs(&[1.0]).unwrap()[1] > before);
    }

    fn fd_check(params: &Mlp, analytic: &Mlp, loss: impl Fn(&Mlp) -> f64, what: &str) {
        let a = analytic.flat_params();
        let mut p = params.flat_params();
        let h = 1e-6;
        for i in 0..p.len() {
            let orig = p[i];
            let mut probe = params.clone();
            p[i] = orig + h;
            probe.set_flat_params(&p).unwrap();
            let up = loss(&probe);
            p[i] = orig - h;
            probe.set_flat_params(&p).unwrap();
            let down = loss(&probe);
            p[i] = orig;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - a[i]).abs() <= 1e-6 * (1.0 + a[i].abs()), "{what} param {i}: {fd} vs {}", a[i]);
        }
    }

    #[test]
    fn critic_gradients_match_finite_differences() {
        for seed in 0..20 {
            let mut rng = seeded(200 + seed);
            let critic = Critic::new(&mut rng, 3, 5, 3);
            let enc = Encoder::new(&mut rng, 4, 5, 3);
            let batch = random_batch(&mut rng, 4, 4, 3);
            let targets: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let out = critic_loss(&critic, &enc, &batch, &targets, 0.5).unwrap();
            fd_check(&critic.q1, &out.q1, |q| {
                let c = Critic { q1: q.clone(), ..critic.clone() };
                critic_loss(&c, &enc, &batch, &targets, 0.5).unwrap().loss
            }, "q1");
            fd_check(&critic.q2, &out.q2, |q| {
                let c = Critic { q2: q.clone(), ..critic.clone() };
                critic_loss(&c, &enc, &batch, &targets, 0.5).unwrap().loss
            }, "q2");
            fd_check(enc.net(), &out.encoder, |net| {
                critic_loss(&critic, &Encoder::from_mlp(net.clone()), &batch, &targets, 0.5).unwrap().loss
            }, "encoder");
        }
    }

    #[test]
    fn actor_gradients_match_finite_differences() {
        for seed in 0..20 {
            let mut rng = seeded(300 + seed);
            let critic = Critic::new(&mut rng, 3, 5, 4);
            let actor = Actor::new(&mut rng, 3, 5, 4);
            let z = Matrix::from_vec(5, 3, (0..15).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let alpha = rng.random_range(0.0..0.5);
            let out = actor_loss(&actor, &critic, &z, alpha).unwrap();
            fd_check(&actor.net, &out.grads, |net| actor_loss(&Actor { net: net.clone() }, &critic, &z, alpha).unwrap().loss, "actor");
        }
    }

    #[test]
    fn actor_update_leaves_the_encoder_alone() {
        let mut rng = seeded(4);
        let pair = EncoderPair::new(Encoder::new(&mut rng, 5, 8, 4), 0.95).unwrap();
        let cfg = TrainConfig { batch_size: 6, learning_rate: 0.0, target_variant: TargetVariant::ObservationSampling, ..TrainConfig::default() };
        let learner = RepresentationLearner::new(pair, None, cfg).unwrap();
        let agent_cfg = AgentConfig { critic_lr: 0.0, actor_lr: 0.1, ..AgentConfig::default() };
        let mut agent = SimsrAgent::new(&mut rng, learner, 3, agent_cfg).unwrap();
        let online = agent.pair().online.clone();
        let actor = agent.actor.clone();
        agent.update(&random_batch(&mut rng, 6, 5, 3), &mut rng).unwrap();
        assert_eq!(agent.pair().online, online);
        assert_ne!(agent.actor, actor);
    }

    #[test]
    fn self_loop_q_converges_to_the_geometric_sum() {
        // One state, one action, reward 1: Q = 1 / (1 − γ).
        let mut rng = seeded(5);
        let gamma = 0.5;
        let t = Transition { obs: vec![1.0], action: 0, reward: 1.0, next_obs: vec![1.0], done: false };
        let batch = Batch::from_transitions(&[t.clone(), t]).unwrap();
        let pair = EncoderPair::new(Encoder::identity(1), 0.95).unwrap();
        let cfg = TrainConfig { gamma, batch_size: 2, target_variant: TargetVariant::ObservationSampling, ..TrainConfig::default() };
        let mut learner = RepresentationLearner::new(pair, None, cfg).unwrap();
        learner.train_encoder = false;
        let agent_cfg = AgentConfig { gamma, alpha: 0.0, q_tau: 0.5, target_period: 1, critic_lr: 0.05, hidden: 8, ..AgentConfig::default() };
        let mut agent = SimsrAgent::new(&mut rng, learner, 1, agent_cfg).unwrap();
        for _ in 0..4000 {
            agent.update(&batch, &mut rng).unwrap();
        }
        let q = agent.critic.q_min(&Matrix::from_rows(&[[1.0]]).unwrap()).unwrap()[(0, 0)];
        assert!((q - 2.0).abs() < 0.1, "{q}");
    }
}
