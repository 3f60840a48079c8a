//! Fixed points of behavioral-metric operators on finite MDPs.
//!
//! All three operators share the form
//!
//! ```text
//! F U(x, y) = |r^π_x − r^π_y| + γ · D(P^π_x, P^π_y; U)
//! ```
//!
//! and differ in how `D` couples the successor distributions:
//! a successor lookup (deterministic MDPs only), the exact 1-Wasserstein
//! distance, or the independent coupling `Σ P^π(x'|x) P^π(y'|y) U(x', y')`
//! shared by MICo and SimSR. Each is a γ-contraction in the sup norm.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{symmetrize, DistanceMatrix, Matrix};
use crate::mdp::{policy_reward, policy_transition, policy_value, FiniteMdp, Policy};
use crate::transport::w1_exact;

pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    /// `γ · U(succ x, succ y)`; every `P^π` row must be one-hot.
    DeterministicBisim,
    /// `γ · W₁(P^π_x, P^π_y; U)`.
    WassersteinBisim,
    /// `γ · E[U(x', y')]` with `x'`, `y'` drawn independently.
    IndependentCoupling,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 3] = [
        OperatorKind::DeterministicBisim,
        OperatorKind::WassersteinBisim,
        OperatorKind::IndependentCoupling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::DeterministicBisim => "deterministic",
            OperatorKind::WassersteinBisim => "wasserstein",
            OperatorKind::IndependentCoupling => "independent",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    pub distances: DistanceMatrix,
    pub iterations: usize,
    /// Sup norm of the last update `‖F U − U‖∞`; bounds the residual of
    /// the returned matrix from above.
    pub final_residual: f64,
}

/// The policy-induced quantities every operator step needs. Computing them
/// once per solve keeps the iteration itself allocation-light.
#[derive(Debug, Clone)]
pub struct PolicyModel {
    gamma: f64,
    reward: Vec<f64>,
    transition: Matrix,
    successor: Option<Vec<usize>>,
}

impl PolicyModel {
    pub fn new(mdp: &FiniteMdp, policy: &Policy) -> Result<Self> {
        let reward = policy_reward(mdp, policy)?;
        let transition = policy_transition(mdp, policy)?;
        let successor = (0..mdp.n_states())
            .map(|s| {
                let row = transition.row(s);
                let mut support = row.iter().enumerate().filter(|(_, &p)| p != 0.0);
                match (support.next(), support.next()) {
                    (Some((next, &p)), None) if (p - 1.0).abs() <= crate::mdp::PROB_TOL => Some(next),
                    _ => None,
                }
            })
            .collect::<Option<Vec<usize>>>();
        Ok(Self { gamma: mdp.gamma(), reward, transition, successor })
    }

    pub fn n_states(&self) -> usize {
        self.reward.len()
    }

    pub fn reward(&self) -> &[f64] {
        &self.reward
    }

    pub fn transition(&self) -> &Matrix {
        &self.transition
    }

    /// Largest reward gap `max |r^π_x − r^π_y|`.
    pub fn reward_spread(&self) -> f64 {
        let hi = self.reward.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = self.reward.iter().copied().fold(f64::INFINITY, f64::min);
        hi - lo
    }

    pub fn step(&self, u: &DistanceMatrix, kind: OperatorKind) -> Result<DistanceMatrix> {
        let n = self.n_states();
        check_dim("distance matrix size", n, u.n())?;
        let g = self.gamma;
        let r = &self.reward;
        let mut out = Matrix::zeros(n, n);
        match kind {
            OperatorKind::IndependentCoupling => {
                // P U Pᵀ, rows accumulated in a fixed order.
                let pu = self.transition.matmul(u.as_matrix())?;
                let pupt = pu.matmul_transposed(&self.transition)?;
                for x in 0..n {
                    for y in 0..n {
                        out[(x, y)] = (r[x] - r[y]).abs() + g * pupt[(x, y)];
                    }
                }
            }
            OperatorKind::DeterministicBisim => {
                let succ = self.successor.as_ref().ok_or_else(|| {
                    Error::Precondition("deterministic bisimulation needs one-hot P^π rows".into())
                })?;
                for x in 0..n {
                    for y in 0..n {
                        out[(x, y)] = (r[x] - r[y]).abs() + g * u.get(succ[x], succ[y]);
                    }
                }
            }
            OperatorKind::WassersteinBisim => {
                for x in 0..n {
                    for y in (x + 1)..n {
                        let w = w1_exact(self.transition.row(x), self.transition.row(y), u)?;
                        let v = (r[x] - r[y]).abs() + g * w;
                        out[(x, y)] = v;
                        out[(y, x)] = v;
                    }
                    // W₁(p, p) = 0 and the reward gap vanishes on the diagonal.
                }
            }
        }
        Ok(DistanceMatrix::from_symmetric(symmetrize(out)))
    }
}

/// One application of the operator selected by `kind`.
pub fn operator_step(
    u: &DistanceMatrix,
    mdp: &FiniteMdp,
    policy: &Policy,
    kind: OperatorKind,
) -> Result<DistanceMatrix> {
    PolicyModel::new(mdp, policy)?.step(u, kind)
}

/// Iteration budget: the contraction bound for reaching `tol` from zero,
/// with a 2× safety factor.
pub fn default_max_iter(gamma: f64, reward_spread: f64, tol: f64) -> usize {
    2 * crate::mdp::value_iteration_bound(gamma, reward_spread, tol) + 10
}

/// Iterates from `U₀ = 0`.
pub fn solve_fixed_point(
    mdp: &FiniteMdp,
    policy: &Policy,
    kind: OperatorKind,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPointReport> {
    solve_fixed_point_from(mdp, policy, kind, tol, max_iter, DistanceMatrix::zeros(mdp.n_states()))
}

/// Iterates `U ← F U` from `init` until `‖F U − U‖∞ ≤ tol`.
pub fn solve_fixed_point_from(
    mdp: &FiniteMdp,
    policy: &Policy,
    kind: OperatorKind,
    tol: f64,
    max_iter: usize,
    init: DistanceMatrix,
) -> Result<FixedPointReport> {
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    let model = PolicyModel::new(mdp, policy)?;
    check_dim("initial distance matrix", mdp.n_states(), init.n())?;
    let mut u = init;
    let mut residual = f64::INFINITY;
    for iteration in 1..=max_iter {
        let next = model.step(&u, kind)?;
        residual = next.sup_distance(&u);
        u = next;
        if residual <= tol {
            return Ok(FixedPointReport { distances: u, iterations: iteration, final_residual: residual });
        }
    }
    Err(Error::NotConverged { iterations: max_iter, residual })
}

/// A pair where `|V(x) − V(y)|` exceeds `U(x, y)` by more than the slack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundViolation {
    pub x: usize,
    pub y: usize,
    pub value_gap: f64,
    pub distance: f64,
}

/// Checks `|V^π(x) − V^π(y)| ≤ U(x, y)` for every pair with slack
/// `tol·(1+γ)/(1−γ)`, where `U` is an independent-coupling fixed point
/// computed to residual `tol`. Returns the worst violation, if any.
pub fn value_bound_check(
    mdp: &FiniteMdp,
    policy: &Policy,
    u: &DistanceMatrix,
    tol: f64,
) -> Result<Option<BoundViolation>> {
    check_dim("distance matrix size", mdp.n_states(), u.n())?;
    let g = mdp.gamma();
    // Evaluating V to tol·(1−γ)/2 keeps its error below tol/2 per state.
    let values = policy_value(mdp, policy, tol * (1.0 - g) / 2.0)?.values;
    let slack = tol * (1.0 + g) / (1.0 - g);
    let mut worst: Option<(f64, BoundViolation)> = None;
    let n = mdp.n_states();
    for x in 0..n {
        for y in 0..n {
            let gap = (values[x] - values[y]).abs();
            let excess = gap - u.get(x, y) - slack;
            if excess > 0.0 && worst.as_ref().is_none_or(|(e, _)| excess > *e) {
                worst = Some((excess, BoundViolation { x, y, value_gap: gap, distance: u.get(x, y) }));
            }
        }
    }
    Ok(worst.map(|(_, v)| v))
}
