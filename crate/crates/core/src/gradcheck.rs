//! Central finite-difference checks for [`Mlp`] parameter gradients.

use alloc::vec::Vec;

use crate::nn::Mlp;

/// Default central-difference step.
pub const STEP: f64 = 1e-6;

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub numeric: Vec<f64>,
    pub analytic: Vec<f64>,
    /// `‖numeric − analytic‖₂ / max(‖numeric‖₂, ‖analytic‖₂, 1e-8)`.
    pub relative_error: f64,
}

/// Differentiates `loss` numerically at `params` and compares with `analytic`.
pub fn check(params: &Mlp, analytic: &Mlp, loss: impl Fn(&Mlp) -> f64) -> GradCheck {
    let analytic = analytic.flat_params();
    let mut p = params.flat_params();
    let mut probe = params.clone();
    let mut numeric = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + STEP;
        probe.set_flat_params(&p).expect("same shape");
        let up = loss(&probe);
        p[i] = orig - STEP;
        probe.set_flat_params(&p).expect("same shape");
        let down = loss(&probe);
        p[i] = orig;
        numeric.push((up - down) / (2.0 * STEP));
    }
    let relative_error = relative_error(&numeric, &analytic);
    GradCheck { numeric, analytic, relative_error }
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum());
    let na = libm::sqrt(a.iter().map(|x| x * x).sum());
    let nb = libm::sqrt(b.iter().map(|x| x * x).sum());
    diff / na.max(nb).max(1e-8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::nn::Linear;

    #[test]
    fn linear_loss_is_exact() {
        let net = Mlp::from_layers(alloc::vec![Linear::from_parts(2, 1, alloc::vec![0.5, -1.0], alloc::vec![0.2]).unwrap()]).unwrap();
        let x = Matrix::from_rows(&[[1.0, 3.0]]).unwrap();
        let (_, cache) = net.forward_batch(&x).unwrap();
        let (g, _) = net.backward(&cache, &Matrix::from_rows(&[[1.0]]).unwrap()).unwrap();
        let r = check(&net, &g, |n| n.predict_batch(&x).unwrap()[(0, 0)]);
        assert_eq!(g.flat_params(), alloc::vec![1.0, 3.0, 1.0]);
        assert!(r.relative_error < 1e-9);
        assert!(relative_error(&[1.0], &[2.0]) == 0.5);
    }
}
