//! Ensemble of diagonal-Gaussian latent dynamics heads.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::nn::Mlp;
use crate::rng::{derive_seed, seeded, standard_normal};

pub const DEFAULT_ENSEMBLE_SIZE: usize = 5;

/// `ln(1e-6)`: floor of the predicted log-variance.
pub const LOG_VAR_MIN: f64 = -13.815510557964274;
/// `ln(1e2)`: ceiling of the predicted log-variance.
pub const LOG_VAR_MAX: f64 = 4.605170185988092;

/// `K` heads, each `(latent ⊕ one-hot action) → hidden → hidden → (μ, log σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsEnsemble {
    heads: Vec<Mlp>,
    latent_dim: usize,
    n_actions: usize,
    seeds: Vec<u64>,
}

/// Mean and clamped log-variance for a batch.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub mean: Matrix,
    pub log_var: Matrix,
}

#[derive(Debug, Clone)]
pub struct NllOutput {
    /// Ensemble loss `(1/K) Σ_k L_k`.
    pub loss: f64,
    pub head_losses: Vec<f64>,
    /// Gradient of `loss` for each head's parameters.
    pub grads: Vec<Mlp>,
}

impl DynamicsEnsemble {
    /// Head `k` is initialized from `derive_seed(seed, k)`.
    pub fn new(latent_dim: usize, n_actions: usize, hidden: usize, k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Validation("ensemble needs at least one head".into()));
        }
        let seeds: Vec<u64> = (0..k as u64).map(|i| derive_seed(seed, i)).collect();
        let heads = seeds
            .iter()
            .map(|&s| Mlp::new(&mut seeded(s), &[latent_dim + n_actions, hidden, hidden, 2 * latent_dim]))
            .collect();
        Ok(Self { heads, latent_dim, n_actions, seeds })
    }

    pub fn from_heads(heads: Vec<Mlp>, latent_dim: usize, n_actions: usize) -> Result<Self> {
        if heads.is_empty() {
            return Err(Error::Validation("ensemble needs at least one head".into()));
        }
        for h in &heads {
            check_dim("dynamics head input", latent_dim + n_actions, h.in_dim())?;
            check_dim("dynamics head output", 2 * latent_dim, h.out_dim())?;
        }
        let seeds = alloc::vec![0; heads.len()];
        Ok(Self { heads, latent_dim, n_actions, seeds })
    }

    pub fn size(&self) -> usize {
        self.heads.len()
    }

    pub fn heads(&self) -> &[Mlp] {
        &self.heads
    }

    pub fn heads_mut(&mut self) -> &mut [Mlp] {
        &mut self.heads
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn inputs(&self, latents: &Matrix, actions: &[usize]) -> Result<Matrix> {
        check_dim("dynamics latent width", self.latent_dim, latents.cols())?;
        check_dim("dynamics action count", latents.rows(), actions.len())?;
        let width = self.latent_dim + self.n_actions;
        let mut x = Matrix::zeros(latents.rows(), width);
        for (r, &a) in actions.iter().enumerate() {
            if a >= self.n_actions {
                return Err(Error::InvalidAction { action: a, n_actions: self.n_actions });
            }
            let row = x.row_mut(r);
            row[..self.latent_dim].copy_from_slice(latents.row(r));
            row[self.latent_dim + a] = 1.0;
        }
        Ok(x)
    }

    fn split(&self, out: &Matrix) -> Prediction {
        let d = self.latent_dim;
        let mut mean = Matrix::zeros(out.rows(), d);
        let mut log_var = Matrix::zeros(out.rows(), d);
        for r in 0..out.rows() {
            let row = out.row(r);
            mean.row_mut(r).copy_from_slice(&row[..d]);
            for (lv, &raw) in log_var.row_mut(r).iter_mut().zip(&row[d..]) {
                *lv = raw.clamp(LOG_VAR_MIN, LOG_VAR_MAX);
            }
        }
        Prediction { mean, log_var }
    }

    pub fn predict(&self, head: usize, latents: &Matrix, actions: &[usize]) -> Result<Prediction> {
        let x = self.inputs(latents, actions)?;
        Ok(self.split(&self.heads[head].predict_batch(&x)?))
    }

    /// Gaussian negative log-likelihood averaged over heads, batch rows and
    /// latent dimensions (constant `ln 2π / 2` omitted):
    ///
    /// `(1/K) Σ_k mean[ log σ²_k / 2 + (target − μ_k)² / (2 σ²_k) ]`.
    ///
    /// `targets` are treated as constants.
    pub fn nll_loss(&self, latents: &Matrix, actions: &[usize], targets: &Matrix) -> Result<NllOutput> {
        check_dim("dynamics target rows", latents.rows(), targets.rows())?;
        check_dim("dynamics target width", self.latent_dim, targets.cols())?;
        if !latents.is_finite() || !targets.is_finite() {
            return Err(Error::Validation("dynamics inputs must be finite".into()));
        }
        let x = self.inputs(latents, actions)?;
        let (b, d, k) = (latents.rows(), self.latent_dim, self.heads.len());
        let scale = 1.0 / (b * d) as f64;
        let mut head_losses = Vec::with_capacity(k);
        let mut grads = Vec::with_capacity(k);
        for head in &self.heads {
            let (out, cache) = head.forward_batch(&x)?;
            let mut grad_out = Matrix::zeros(b, 2 * d);
            let mut total = 0.0;
            for r in 0..b {
                let row = out.row(r);
                let target = targets.row(r);
                let g = grad_out.row_mut(r);
                for j in 0..d {
                    let mu = row[j];
                    let raw = row[d + j];
                    let lv = raw.clamp(LOG_VAR_MIN, LOG_VAR_MAX);
                    let inv_var = libm::exp(-lv);
                    let err = target[j] - mu;
                    total += 0.5 * lv + 0.5 * err * err * inv_var;
                    g[j] = -err * inv_var * scale / k as f64;
                    if raw > LOG_VAR_MIN && raw < LOG_VAR_MAX {
                        g[d + j] = (0.5 - 0.5 * err * err * inv_var) * scale / k as f64;
                    }
                }
            }
            head_losses.push(total * scale);
            grads.push(head.backward(&cache, &grad_out)?.0);
        }
        let loss = head_losses.iter().sum::<f64>() / k as f64;
        Ok(NllOutput { loss, head_losses, grads })
    }

    /// Draws `μ + σ·z` from `head` given standard-normal `noise`.
    pub fn sample_with_noise(&self, head: usize, latents: &Matrix, actions: &[usize], noise: &Matrix) -> Result<Matrix> {
        let pred = self.predict(head, latents, actions)?;
        check_dim("noise rows", latents.rows(), noise.rows())?;
        check_dim("noise width", self.latent_dim, noise.cols())?;
        let mut out = pred.mean;
        for r in 0..out.rows() {
            let lv = pred.log_var.row(r);
            let z = noise.row(r);
            for (j, o) in out.row_mut(r).iter_mut().enumerate() {
                *o += libm::exp(0.5 * lv[j]) * z[j];
            }
        }
        Ok(out)
    }

    /// Standard-normal noise for a batch, row-major from the stream.
    pub fn draw_noise<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> Matrix {
        let data = (0..rows * self.latent_dim).map(|_| standard_normal(rng)).collect();
        Matrix::from_vec(rows, self.latent_dim, data).expect("sized")
    }

    /// Picks one head uniformly and samples every row of the batch from it.
    /// The samples are not projected back onto the unit sphere.
    pub fn sample_batch<R: Rng + ?Sized>(&self, latents: &Matrix, actions: &[usize], rng: &mut R) -> Result<(Matrix, usize)> {
        let head = rng.random_range(0..self.heads.len());
        let noise = self.draw_noise(latents.rows(), rng);
        Ok((self.sample_with_noise(head, latents, actions, &noise)?, head))
    }

    /// Single-sample form of [`DynamicsEnsemble::sample_batch`].
    pub fn sample_next<R: Rng + ?Sized>(&self, latent: &[f64], action: usize, rng: &mut R) -> Result<(Vec<f64>, usize)> {
        let latents = Matrix::from_vec(1, latent.len(), latent.to_vec())?;
        let (m, head) = self.sample_batch(&latents, &[action], rng)?;
        Ok((m.into_vec(), head))
    }

    /// Total predictive variance averaged over latent dimensions:
    /// mean aleatoric variance plus the spread of head means.
    pub fn predictive_variance(&self, latent: &[f64], action: usize) -> Result<f64> {
        let latents = Matrix::from_vec(1, latent.len(), latent.to_vec())?;
        let preds = (0..self.heads.len())
            .map(|h| self.predict(h, &latents, &[action]))
            .collect::<Result<Vec<_>>>()?;
        let k = preds.len() as f64;
        let mut total = 0.0;
        for j in 0..self.latent_dim {
            let mean: f64 = preds.iter().map(|p| p.mean[(0, j)]).sum::<f64>() / k;
            let spread: f64 = preds.iter().map(|p| { let d = p.mean[(0, j)] - mean; d * d }).sum::<f64>() / k;
            let aleatoric: f64 = preds.iter().map(|p| libm::exp(p.log_var[(0, j)])).sum::<f64>() / k;
            total += spread + aleatoric;
        }
        Ok(total / self.latent_dim as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Linear;

    /// One linear head producing `(μ, log σ²) = (w·x, v·x)` on a 1-d latent.
    fn linear_head(mu_w: f64, lv_w: f64) -> Mlp {
        // input = [latent, one-hot(1)]
        let weight = alloc::vec![mu_w, 0.0, lv_w, 0.0];
        Mlp::from_layers(alloc::vec![Linear::from_parts(2, 2, weight, alloc::vec![0.0, 0.0]).unwrap()]).unwrap()
    }

    #[test]
    fn perfect_unit_variance_prediction_has_zero_loss() {
        let ens = DynamicsEnsemble::from_heads(alloc::vec![linear_head(1.0, 0.0)], 1, 1).unwrap();
        let x = Matrix::from_rows(&[[0.3], [-1.2]]).unwrap();
        let out = ens.nll_loss(&x, &[0, 0], &x).unwrap();
        assert_eq!(out.loss, 0.0);
    }

    #[test]
    fn plug_in_value() {
        let ens = DynamicsEnsemble::from_heads(alloc::vec![linear_head(0.0, 0.0)], 1, 1).unwrap();
        let x = Matrix::from_rows(&[[0.5]]).unwrap();
        let t = Matrix::from_rows(&[[1.0]]).unwrap();
        assert_eq!(ens.nll_loss(&x, &[0], &t).unwrap().loss, 0.5);
    }

    #[test]
    fn matches_loop_formula() {
        let ens = DynamicsEnsemble::new(3, 2, 8, 3, 77).unwrap();
        let mut rng = seeded(5);
        let lat = Matrix::from_vec(4, 3, (0..12).map(|_| rng.random::<f64>() - 0.5).collect()).unwrap();
        let tgt = Matrix::from_vec(4, 3, (0..12).map(|_| rng.random::<f64>() - 0.5).collect()).unwrap();
        let acts = [0, 1, 1, 0];
        let got = ens.nll_loss(&lat, &acts, &tgt).unwrap().loss;
        let mut want = 0.0;
        for head in ens.heads() {
            let mut head_total = 0.0;
            for r in 0..4 {
                let mut input = lat.row(r).to_vec();
                input.extend([f64::from(u8::from(acts[r] == 0)), f64::from(u8::from(acts[r] == 1))]);
                let out = head.forward(&input).unwrap();
                for j in 0..3 {
                    let lv = out[3 + j].clamp(LOG_VAR_MIN, LOG_VAR_MAX);
                    let var = libm::exp(lv);
                    head_total += lv / 2.0 + { let d = tgt[(r, j)] - out[j]; d * d } / (2.0 * var);
                }
            }
            want += head_total / 12.0;
        }
        want /= 3.0;
        assert!((got - want).abs() < 1e-13);
    }

    #[test]
    fn single_head_always_index_zero() {
        let ens = DynamicsEnsemble::new(2, 2, 4, 1, 3).unwrap();
        let mut rng = seeded(1);
        for _ in 0..50 {
            assert_eq!(ens.sample_next(&[0.1, 0.2], 1, &mut rng).unwrap().1, 0);
        }
    }

    #[test]
    fn clamp_floor_makes_sampling_nearly_deterministic() {
        let ens = DynamicsEnsemble::from_heads(alloc::vec![linear_head(2.0, -1e3)], 1, 1).unwrap();
        let mut rng = seeded(2);
        let (s, _) = ens.sample_next(&[0.25], 0, &mut rng).unwrap();
        assert!((s[0] - 0.5).abs() <= 3.0 * libm::sqrt(1e-6));
    }

    #[test]
    fn head_frequencies_are_uniform() {
        let ens = DynamicsEnsemble::new(1, 1, 2, 5, 3).unwrap();
        let mut rng = seeded(10);
        let mut counts = [0usize; 5];
        let n = 100_000;
        let lat = Matrix::from_rows(&[[0.3]]).unwrap();
        for _ in 0..n {
            counts[ens.sample_batch(&lat, &[0], &mut rng).unwrap().1] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.2).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn heads_use_distinct_seeds() {
        let ens = DynamicsEnsemble::new(2, 2, 4, 5, 3).unwrap();
        for i in 0..5 {
            for j in i + 1..5 {
                assert_ne!(ens.seeds()[i], ens.seeds()[j]);
                assert!(ens.heads()[i].sup_distance(&ens.heads()[j]) > 0.0);
            }
        }
    }

    #[test]
    fn rejects_non_finite_targets() {
        let ens = DynamicsEnsemble::new(1, 1, 2, 1, 3).unwrap();
        let x = Matrix::from_rows(&[[0.5]]).unwrap();
        let t = Matrix::from_rows(&[[f64::NAN]]).unwrap();
        assert!(matches!(ens.nll_loss(&x, &[0], &t), Err(Error::Validation(_))));
    }
}
