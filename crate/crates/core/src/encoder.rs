//! Observation encoder with an L2-normalized output, cosine distances, and
//! the momentum (EMA) target encoder.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm, Matrix};
use crate::nn::{Linear, Mlp, MlpCache};

pub const DEFAULT_LATENT_DIM: usize = 50;
pub const DEFAULT_HIDDEN: usize = 64;
/// EMA momentum `m`; the equivalent "τ" convention is `1 − m = 0.05`.
pub const DEFAULT_MOMENTUM: f64 = 0.95;
/// Pre-normalization norms at or below this are rejected.
pub const DEGENERATE_NORM: f64 = 1e-12;
/// Accepted deviation from unit norm for cosine-distance inputs.
pub const UNIT_TOL: f64 = 1e-5;

/// `obs → hidden (ReLU) → hidden (ReLU) → latent`, then `z / ‖z‖₂`.
///
/// With `normalize = false` the raw features are returned; that variant only
/// exists as an ablation of the normalization layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    net: Mlp,
    normalize: bool,
}

#[derive(Debug, Clone)]
pub struct EncoderCache {
    net: MlpCache,
    output: Matrix,
    norms: Vec<f64>,
}

impl EncoderCache {
    /// The encoder outputs of the cached forward pass.
    pub fn output(&self) -> &Matrix {
        &self.output
    }

    /// `‖h‖₂` of each row before normalization.
    pub fn pre_norms(&self) -> &[f64] {
        &self.norms
    }
}

impl Encoder {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, obs_dim: usize, hidden: usize, latent_dim: usize) -> Self {
        Self {
            net: Mlp::new(rng, &[obs_dim, hidden, hidden, latent_dim]),
            normalize: true,
        }
    }

    /// Wraps an arbitrary network; the output is normalized.
    pub fn from_mlp(net: Mlp) -> Self {
        Self { net, normalize: true }
    }

    /// A single identity layer. On one-hot observations this is a tabular
    /// (one-hot state) representation.
    pub fn identity(dim: usize) -> Self {
        let mut weight = alloc::vec![0.0; dim * dim];
        for i in 0..dim {
            weight[i * dim + i] = 1.0;
        }
        let layer = Linear::from_parts(dim, dim, weight, alloc::vec![0.0; dim]).expect("square identity");
        Self::from_mlp(Mlp::from_layers(alloc::vec![layer]).expect("one layer"))
    }

    /// Drops the normalization layer (ablation only).
    pub fn without_normalization(mut self) -> Self {
        self.normalize = false;
        self
    }

    pub fn is_normalized(&self) -> bool {
        self.normalize
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn obs_dim(&self) -> usize {
        self.net.in_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.net.out_dim()
    }

    pub fn encode(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let mut h = self.net.forward(obs)?;
        if self.normalize {
            let n = norm(&h);
            if !(n > DEGENERATE_NORM) {
                return Err(Error::Degenerate { norm: n });
            }
            h.iter_mut().for_each(|x| *x /= n);
        }
        Ok(h)
    }

    pub fn encode_batch(&self, obs: &Matrix) -> Result<Matrix> {
        Ok(self.forward(obs)?.0)
    }

    pub fn forward(&self, obs: &Matrix) -> Result<(Matrix, EncoderCache)> {
        let (mut h, net) = self.net.forward_batch(obs)?;
        let mut norms = Vec::with_capacity(h.rows());
        for r in 0..h.rows() {
            let row = h.row_mut(r);
            let n = norm(row);
            norms.push(n);
            if self.normalize {
                if !(n > DEGENERATE_NORM) {
                    return Err(Error::Degenerate { norm: n });
                }
                row.iter_mut().for_each(|x| *x /= n);
            }
        }
        let cache = EncoderCache { net, output: h.clone(), norms };
        Ok((h, cache))
    }

    /// Parameter gradient of `Σ upstream ⊙ output` through the cached pass,
    /// including the normalization Jacobian `(I − z zᵀ) / ‖h‖`.
    pub fn backward(&self, cache: &EncoderCache, upstream: &Matrix) -> Result<Mlp> {
        Ok(self.backward_with_input(cache, upstream)?.0)
    }

    /// Like [`Encoder::backward`], also returning `∂L/∂obs`.
    pub fn backward_with_input(&self, cache: &EncoderCache, upstream: &Matrix) -> Result<(Mlp, Matrix)> {
        check_dim("encoder upstream rows", cache.output.rows(), upstream.rows())?;
        check_dim("encoder upstream cols", cache.output.cols(), upstream.cols())?;
        let mut grad_h = upstream.clone();
        if self.normalize {
            for r in 0..grad_h.rows() {
                let z = cache.output.row(r);
                let radial = dot(z, grad_h.row(r));
                let n = cache.norms[r];
                for (g, &zk) in grad_h.row_mut(r).iter_mut().zip(z) {
                    *g = (*g - radial * zk) / n;
                }
            }
        }
        self.net.backward(&cache.net, &grad_h)
    }

    /// `encode_backward`: forward then backward in one call.
    pub fn encode_backward(&self, obs: &Matrix, upstream: &Matrix) -> Result<Mlp> {
        let (_, cache) = self.forward(obs)?;
        self.backward(&cache, upstream)
    }
}

fn check_unit(v: &[f64]) -> Result<()> {
    let n = norm(v);
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::Validation(format!("expected a unit vector, norm is {n}")));
    }
    Ok(())
}

/// `1 − u·v` for unit vectors, clamped into `[0, 2]`.
pub fn cos_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    check_dim("cosine distance operands", u.len(), v.len())?;
    check_unit(u)?;
    check_unit(v)?;
    Ok((1.0 - dot(u, v)).clamp(0.0, 2.0))
}

/// `1 − u·v / (‖u‖‖v‖)` for arbitrary nonzero vectors.
///
/// Only the latent-dynamics target uses this: samples drawn from the
/// Gaussian heads are not on the unit sphere.
pub fn cos_distance_unnormalized(u: &[f64], v: &[f64]) -> Result<f64> {
    check_dim("cosine distance operands", u.len(), v.len())?;
    let (nu, nv) = (norm(u), norm(v));
    if !(nu > DEGENERATE_NORM) || !(nv > DEGENERATE_NORM) {
        return Err(Error::Degenerate { norm: nu.min(nv) });
    }
    Ok((1.0 - dot(u, v) / (nu * nv)).clamp(0.0, 2.0))
}

/// `1 − A Bᵀ` for row-normalized batches.
pub fn cos_distance_matrix(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    for r in 0..a.rows() {
        check_unit(a.row(r))?;
    }
    for r in 0..b.rows() {
        check_unit(b.row(r))?;
    }
    Ok(a.matmul_transposed(b)?.map(|x| 1.0 - x))
}

/// Online encoder and its exponential-moving-average twin.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderPair {
    pub online: Encoder,
    pub target: Encoder,
    momentum: f64,
}

impl EncoderPair {
    /// The target starts as an exact copy of `online`.
    pub fn new(online: Encoder, momentum: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Validation(format!("momentum {momentum} is outside [0, 1)")));
        }
        Ok(Self { target: online.clone(), online, momentum })
    }

    /// Reassembles a pair from stored parameters.
    pub fn from_parts(online: Encoder, target: Encoder, momentum: f64) -> Result<Self> {
        if !online.net.same_shape(&target.net) {
            return Err(Error::Validation("online and target encoders differ in shape".into()));
        }
        let mut pair = Self::new(online, momentum)?;
        pair.target = target;
        Ok(pair)
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    /// `target ← m · target + (1 − m) · online`.
    pub fn ema_update(&mut self) {
        let m = self.momentum;
        let online = self.online.net.blocks();
        for (t, o) in self.target.net.blocks_mut().into_iter().zip(online) {
            for (tx, &ox) in t.iter_mut().zip(o) {
                *tx = m * *tx + (1.0 - m) * ox;
            }
        }
    }
}
