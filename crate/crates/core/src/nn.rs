//! Fully connected ReLU networks with hand-written backpropagation.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;

/// Affine layer `y = W x + b` with `W` stored row-major as `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    in_dim: usize,
    out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Uniform in `[−k, k]` with `k = 1/√fan_in`.
    pub fn init<R: Rng + ?Sized>(rng: &mut R, in_dim: usize, out_dim: usize) -> Self {
        let k = 1.0 / libm::sqrt(in_dim as f64);
        let mut draw = || rng.random_range(-k..=k);
        let weight = (0..in_dim * out_dim).map(|_| draw()).collect();
        let bias = (0..out_dim).map(|_| draw()).collect();
        Self { in_dim, out_dim, weight, bias }
    }

    pub fn from_parts(in_dim: usize, out_dim: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        check_dim("layer weight", in_dim * out_dim, weight.len())?;
        check_dim("layer bias", out_dim, bias.len())?;
        Ok(Self { in_dim, out_dim, weight, bias })
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// Batched forward pass. Each output row is built as `b + Σ_k x_k W[:, k]`
    /// in increasing `k`, so the result for a row does not depend on the
    /// rest of the batch.
    fn forward_rows(&self, x: &Matrix) -> Matrix {
        let (n_in, n_out) = (self.in_dim, self.out_dim);
        let mut wt = vec![0.0; n_in * n_out];
        for o in 0..n_out {
            for k in 0..n_in {
                wt[k * n_out + o] = self.weight[o * n_in + k];
            }
        }
        let mut y = Matrix::zeros(x.rows(), n_out);
        for r in 0..x.rows() {
            let xr = &x.row(r)[..n_in];
            let yr = &mut y.row_mut(r)[..n_out];
            yr.copy_from_slice(&self.bias);
            for (k, &xk) in xr.iter().enumerate() {
                if xk == 0.0 {
                    continue;
                }
                let col = &wt[k * n_out..(k + 1) * n_out];
                for (yo, &w) in yr.iter_mut().zip(col) {
                    *yo += xk * w;
                }
            }
        }
        y
    }
}

/// Multilayer perceptron: ReLU after every layer except the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Linear>,
}

/// Activations saved by [`Mlp::forward_batch`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// `inputs[l]` is the batch fed into layer `l` (post-ReLU for `l > 0`).
    inputs: Vec<Matrix>,
}

impl Mlp {
    /// `sizes = [in, h1, ..., out]`.
    pub fn new<R: Rng + ?Sized>(rng: &mut R, sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let layers = sizes.windows(2).map(|w| Linear::init(rng, w[0], w[1])).collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Linear>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Validation("an MLP needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            check_dim("consecutive layer sizes", w[0].out_dim, w[1].in_dim)?;
        }
        Ok(Self { layers })
    }

    /// Same shapes, all parameters zero. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(|l| Linear::zeros(l.in_dim, l.out_dim)).collect(),
        }
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.in_dim == b.in_dim && a.out_dim == b.out_dim)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Parameter blocks in serialization order: each layer's weights, then its bias.
    pub fn blocks(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.blocks().concat()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        check_dim("flat parameter vector", self.param_count(), flat.len())?;
        let mut offset = 0;
        for block in self.blocks_mut() {
            block.copy_from_slice(&flat[offset..offset + block.len()]);
            offset += block.len();
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    /// `self += scale · other`, elementwise over parameters.
    pub fn add_scaled(&mut self, other: &Mlp, scale: f64) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    /// `max |self − other|` over parameters.
    pub fn sup_distance(&self, other: &Mlp) -> f64 {
        self.blocks()
            .into_iter()
            .zip(other.blocks())
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let x = Matrix::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.predict_batch(&x)?.into_vec())
    }

    pub fn forward_batch(&self, x: &Matrix) -> Result<(Matrix, MlpCache)> {
        check_dim("network input", self.in_dim(), x.cols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut next = layer.forward_rows(&cur);
            if l != last {
                relu_in_place(next.as_mut_slice());
            }
            inputs.push(cur);
            cur = next;
        }
        Ok((cur, MlpCache { inputs }))
    }

    /// Forward pass without keeping activations.
    pub fn predict_batch(&self, x: &Matrix) -> Result<Matrix> {
        check_dim("network input", self.in_dim(), x.cols())?;
        let last = self.layers.len() - 1;
        let mut cur = self.layers[0].forward_rows(x);
        for (l, layer) in self.layers.iter().enumerate() {
            if l > 0 {
                cur = layer.forward_rows(&cur);
            }
            if l != last {
                relu_in_place(cur.as_mut_slice());
            }
        }
        Ok(cur)
    }

    /// Backpropagates `grad_out = ∂L/∂output` through a cached forward pass.
    /// Returns parameter gradients (summed over the batch) and `∂L/∂input`.
    pub fn backward(&self, cache: &MlpCache, grad_out: &Matrix) -> Result<(Mlp, Matrix)> {
        let batch = cache.inputs[0].rows();
        check_dim("upstream gradient rows", batch, grad_out.rows())?;
        check_dim("upstream gradient cols", self.out_dim(), grad_out.cols())?;
        let mut grads = self.zeros_like();
        let mut delta = grad_out.clone();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &cache.inputs[l];
            let g = &mut grads.layers[l];
            let n_in = layer.in_dim;
            // Parameter gradients: gW = Δᵀ X and gb = Σ_r Δ_r, four rows at a time.
            for o in 0..layer.out_dim {
                let gw = &mut g.weight[o * n_in..(o + 1) * n_in];
                let mut gb = 0.0;
                let mut r = 0;
                while r + 4 <= batch {
                    let d = [delta[(r, o)], delta[(r + 1, o)], delta[(r + 2, o)], delta[(r + 3, o)]];
                    r += 4;
                    if d == [0.0; 4] {
                        continue;
                    }
                    gb += (d[0] + d[1]) + (d[2] + d[3]);
                    let (x0, x1, x2, x3) = (input.row(r - 4), input.row(r - 3), input.row(r - 2), input.row(r - 1));
                    for ((((gk, &a), &b), &c), &e) in gw.iter_mut().zip(x0).zip(x1).zip(x2).zip(x3) {
                        *gk += (d[0] * a + d[1] * b) + (d[2] * c + d[3] * e);
                    }
                }
                for r in r..batch {
                    let d = delta[(r, o)];
                    gb += d;
                    for (gk, &xk) in gw.iter_mut().zip(input.row(r)) {
                        *gk += d * xk;
                    }
                }
                g.bias[o] = gb;
            }
            // Input gradient: Δ W.
            let mut grad_in = Matrix::zeros(batch, n_in);
            for r in 0..batch {
                let gi = grad_in.row_mut(r);
                for (o, &d) in delta.row(r).iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    for (gk, &wk) in gi.iter_mut().zip(&layer.weight[o * n_in..(o + 1) * n_in]) {
                        *gk += d * wk;
                    }
                }
                if l > 0 {
                    // The layer input is a ReLU output: zero where the unit was off.
                    for (gk, &xk) in gi.iter_mut().zip(input.row(r)) {
                        if xk <= 0.0 {
                            *gk = 0.0;
                        }
                    }
                }
            }
            delta = grad_in;
        }
        Ok((grads, delta))
    }
}

#[inline]
fn relu_in_place(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}
