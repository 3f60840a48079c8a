//! First-order optimizers over [`Mlp`] parameters.

use alloc::vec::Vec;

use crate::nn::Mlp;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    /// Plain gradient descent with a fixed step.
    Sgd,
    /// Adam with the usual bias correction.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub const ADAM_DEFAULT: OptimizerKind = OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 };
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    step: u64,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self { kind, lr, step: 0, first: Vec::new(), second: Vec::new() }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    /// Applies one descent step `params ← params − lr · update(grads)`.
    pub fn step(&mut self, params: &mut Mlp, grads: &Mlp) {
        debug_assert!(params.same_shape(grads));
        match self.kind {
            OptimizerKind::Sgd => params.add_scaled(grads, -self.lr),
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let n = params.param_count();
                if self.first.len() != n {
                    self.first = alloc::vec![0.0; n];
                    self.second = alloc::vec![0.0; n];
                }
                self.step += 1;
                let t = self.step as f64;
                let c1 = 1.0 - libm::pow(beta1, t);
                let c2 = 1.0 - libm::pow(beta2, t);
                let mut idx = 0;
                for (p, g) in params.blocks_mut().into_iter().zip(grads.blocks()) {
                    for (x, &gx) in p.iter_mut().zip(g) {
                        let m = &mut self.first[idx];
                        let v = &mut self.second[idx];
                        *m = beta1 * *m + (1.0 - beta1) * gx;
                        *v = beta2 * *v + (1.0 - beta2) * gx * gx;
                        *x -= self.lr * (*m / c1) / (libm::sqrt(*v / c2) + eps);
                        idx += 1;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Linear;

    fn scalar(v: f64) -> Mlp {
        Mlp::from_layers(alloc::vec![Linear::from_parts(1, 1, alloc::vec![v], alloc::vec![0.0]).unwrap()]).unwrap()
    }

    #[test]
    fn sgd_moves_against_gradient() {
        let mut p = scalar(1.0);
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1);
        opt.step(&mut p, &scalar(2.0));
        assert!((p.layers()[0].weight[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_has_unit_magnitude() {
        let mut p = scalar(1.0);
        let mut opt = Optimizer::new(OptimizerKind::ADAM_DEFAULT, 0.01);
        opt.step(&mut p, &scalar(123.0));
        assert!((p.layers()[0].weight[0] - 0.99).abs() < 1e-9);
    }
}
