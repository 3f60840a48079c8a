//! The SimSR representation loss and the per-step encoder / dynamics update.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::buffer::Batch;
use crate::dynamics::{DynamicsEnsemble, DEFAULT_ENSEMBLE_SIZE};
use crate::encoder::{cos_distance_unnormalized, EncoderPair, DEFAULT_MOMENTUM};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, Matrix};
use crate::nn::Mlp;
use crate::optim::{Optimizer, OptimizerKind};

/// Where the next-state latents of the bootstrap target come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetVariant {
    /// Target-encode the observed next observations.
    ObservationSampling,
    /// Sample next latents from one head of the dynamics ensemble, applied to
    /// target-encoded current latents.
    LatentDynamics,
}

impl TargetVariant {
    pub fn name(self) -> &'static str {
        match self {
            TargetVariant::ObservationSampling => "observation_sampling",
            TargetVariant::LatentDynamics => "latent_dynamics",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    Mse,
    Huber,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::Huber => "huber",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub gamma: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// EMA momentum of the target encoder.
    pub momentum: f64,
    pub loss_kind: LossKind,
    pub huber_delta: f64,
    pub target_variant: TargetVariant,
    pub ensemble_size: usize,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            batch_size: 128,
            learning_rate: 1e-3,
            momentum: DEFAULT_MOMENTUM,
            loss_kind: LossKind::Huber,
            huber_delta: 1.0,
            target_variant: TargetVariant::LatentDynamics,
            ensemble_size: DEFAULT_ENSEMBLE_SIZE,
            optimizer: OptimizerKind::Sgd,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Validation(msg.into()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and nonnegative");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(self.huber_delta > 0.0) {
            return bad("huber_delta must be positive");
        }
        if self.target_variant == TargetVariant::LatentDynamics && self.ensemble_size == 0 {
            return bad("latent_dynamics targets need ensemble_size >= 1");
        }
        Ok(())
    }
}

/// `T_ij = |R_i − R_j| + γ · d(t_i, t_j)` where `d` is the cosine distance,
/// or `1 − t_i·t_j` when `normalized` is false (the ablation's distance).
pub fn target_from_next_latents(rewards: &[f64], next: &Matrix, gamma: f64, normalized: bool) -> Result<Matrix> {
    let n = rewards.len();
    check_dim("next latent rows", n, next.rows())?;
    let mut t = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d = if normalized {
                cos_distance_unnormalized(next.row(i), next.row(j))?
            } else {
                1.0 - dot(next.row(i), next.row(j))
            };
            let v = (rewards[i] - rewards[j]).abs() + gamma * d;
            t[(i, j)] = v;
            t[(j, i)] = v;
        }
    }
    Ok(t)
}

/// The bootstrap target for a batch. The target encoder is used throughout,
/// and a single ensemble head serves the whole batch.
pub fn simsr_target<R: Rng + ?Sized>(
    batch: &Batch,
    pair: &EncoderPair,
    variant: TargetVariant,
    ensemble: Option<&DynamicsEnsemble>,
    gamma: f64,
    rng: &mut R,
) -> Result<Matrix> {
    let next = match (variant, ensemble) {
        (TargetVariant::ObservationSampling, _) => pair.target.encode_batch(&batch.next_obs)?,
        (TargetVariant::LatentDynamics, Some(ens)) => {
            let current = pair.target.encode_batch(&batch.obs)?;
            ens.sample_batch(&current, &batch.actions, rng)?.0
        }
        (TargetVariant::LatentDynamics, None) => {
            return Err(Error::Precondition("latent_dynamics targets need a dynamics ensemble".into()))
        }
    };
    target_from_next_latents(&batch.rewards, &next, gamma, pair.target.is_normalized())
}

/// Per-entry loss and its derivative.
fn entry_loss(kind: LossKind, delta: f64, e: f64) -> (f64, f64) {
    match kind {
        LossKind::Mse => (e * e, 2.0 * e),
        LossKind::Huber if e.abs() <= delta => (0.5 * e * e, e),
        LossKind::Huber => (delta * (e.abs() - 0.5 * delta), delta * e.signum()),
    }
}

/// Mean over all `n²` entries of `ℓ(1 − z_i·z_j − T_ij)`, diagonal included,
/// and the exact gradient with respect to `Z`.
pub fn simsr_loss(latents: &Matrix, target: &Matrix, kind: LossKind, huber_delta: f64) -> Result<(f64, Matrix)> {
    let n = latents.rows();
    check_dim("target rows", n, target.rows())?;
    check_dim("target cols", n, target.cols())?;
    if n == 0 {
        return Err(Error::Validation("empty batch".into()));
    }
    let sim = latents.matmul_transposed(latents)?;
    let scale = 1.0 / (n * n) as f64;
    let mut loss = 0.0;
    // g = dL/dD, which is symmetric because D and T are.
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (l, dl) = entry_loss(kind, huber_delta, 1.0 - sim[(i, j)] - target[(i, j)]);
            loss += l;
            g[(i, j)] = dl * scale;
        }
    }
    // D = 1 − Z Zᵀ  ⇒  dL/dZ = −(G + Gᵀ) Z.
    let mut grad = g.matmul(latents)?.map(|x| -x);
    let gt_z = g.transpose().matmul(latents)?;
    for (a, b) in grad.as_mut_slice().iter_mut().zip(gt_z.as_slice()) {
        *a -= b;
    }
    Ok((loss * scale, grad))
}

/// Gradients produced by one SimSR evaluation. The target accumulator only
/// exists to make the stop-gradient observable: nothing ever writes to it.
#[derive(Debug, Clone)]
pub struct SimsrGradients {
    pub loss: f64,
    pub online: Mlp,
    pub target: Mlp,
    /// Mean pre-normalization embedding norm of the online batch.
    pub mean_embedding_norm: f64,
}

/// Forward and backward pass of the SimSR loss for the online encoder.
pub fn simsr_gradients(pair: &EncoderPair, batch: &Batch, target: &Matrix, kind: LossKind, huber_delta: f64) -> Result<SimsrGradients> {
    let (z, cache) = pair.online.forward(&batch.obs)?;
    let (loss, grad_z) = simsr_loss(&z, target, kind, huber_delta)?;
    let online = pair.online.backward(&cache, &grad_z)?;
    let norms = cache.pre_norms();
    Ok(SimsrGradients {
        loss,
        online,
        target: pair.target.net().zeros_like(),
        mean_embedding_norm: norms.iter().sum::<f64>() / norms.len() as f64,
    })
}

/// Values recorded before the parameters move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub simsr_loss: f64,
    /// `NaN` when no ensemble is trained.
    pub dynamics_loss: f64,
    pub mean_embedding_norm: f64,
}

/// Encoder pair, optional dynamics ensemble and their optimizers.
#[derive(Debug, Clone)]
pub struct RepresentationLearner {
    pub pair: EncoderPair,
    pub ensemble: Option<DynamicsEnsemble>,
    pub config: TrainConfig,
    encoder_opt: Optimizer,
    dynamics_opts: Vec<Optimizer>,
    /// When false the encoder is frozen: no SimSR step and no EMA motion.
    pub train_encoder: bool,
}

impl RepresentationLearner {
    pub fn new(pair: EncoderPair, ensemble: Option<DynamicsEnsemble>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if config.target_variant == TargetVariant::LatentDynamics && ensemble.is_none() {
            return Err(Error::Precondition("latent_dynamics targets need a dynamics ensemble".into()));
        }
        if let Some(ens) = &ensemble {
            check_dim("ensemble latent width", pair.online.latent_dim(), ens.latent_dim())?;
        }
        let encoder_opt = Optimizer::new(config.optimizer, config.learning_rate);
        let dynamics_opts = ensemble
            .as_ref()
            .map(|e| (0..e.size()).map(|_| Optimizer::new(config.optimizer, config.learning_rate)).collect())
            .unwrap_or_default();
        Ok(Self { pair, ensemble, config, encoder_opt, dynamics_opts, train_encoder: true })
    }

    /// Applies an externally computed online-encoder gradient (the critic's).
    pub fn apply_encoder_gradient(&mut self, grads: &Mlp) {
        if self.train_encoder {
            self.encoder_opt.step(self.pair.online.net_mut(), grads);
        }
    }

    /// One SimSR step, one dynamics step, then the EMA update.
    pub fn train_step<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<StepMetrics> {
        check_dim("batch size", self.config.batch_size, batch.len())?;
        let cfg = &self.config;
        let target = simsr_target(batch, &self.pair, cfg.target_variant, self.ensemble.as_ref(), cfg.gamma, rng)?;
        let grads = simsr_gradients(&self.pair, batch, &target, cfg.loss_kind, cfg.huber_delta)?;
        if !grads.loss.is_finite() {
            return Err(Error::Validation(format!("non-finite SimSR loss {}", grads.loss)));
        }

        let mut dynamics_loss = f64::NAN;
        if let Some(ens) = self.ensemble.as_mut() {
            // Inputs and targets are online encodings, detached from the encoder.
            let current = self.pair.online.encode_batch(&batch.obs)?;
            let next = self.pair.online.encode_batch(&batch.next_obs)?;
            let nll = ens.nll_loss(&current, &batch.actions, &next)?;
            dynamics_loss = nll.loss;
            for ((head, opt), g) in ens.heads_mut().iter_mut().zip(&mut self.dynamics_opts).zip(&nll.grads) {
                opt.step(head, g);
            }
        }

        if self.train_encoder {
            self.encoder_opt.step(self.pair.online.net_mut(), &grads.online);
            self.pair.ema_update();
        }
        Ok(StepMetrics { simsr_loss: grads.loss, dynamics_loss, mean_embedding_norm: grads.mean_embedding_norm })
    }
}
