//! Finite MDPs, stochastic policies, and exact value oracles.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;

/// Row sums of probability tables must match 1 within this tolerance.
pub const PROB_TOL: f64 = 1e-9;

/// A finite MDP `(S, A, P, r, γ)`.
///
/// `transition` is stored flat as `P[s][a][s']`, `reward` as `r[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    gamma: f64,
}

/// A single broken invariant of an MDP description.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptySpace { n_states: usize, n_actions: usize },
    TransitionShape { expected: usize, found: usize },
    RewardShape { expected: usize, found: usize },
    NegativeProbability { state: usize, action: usize, next: usize, value: f64 },
    NonFiniteProbability { state: usize, action: usize, next: usize },
    RowSum { state: usize, action: usize, sum: f64 },
    NonFiniteReward { state: usize, action: usize },
    Discount { gamma: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::EmptySpace { n_states, n_actions } => {
                write!(f, "need at least one state and action, got {n_states}x{n_actions}")
            }
            Violation::TransitionShape { expected, found } => {
                write!(f, "transition tensor has {found} entries, expected {expected}")
            }
            Violation::RewardShape { expected, found } => {
                write!(f, "reward table has {found} entries, expected {expected}")
            }
            Violation::NegativeProbability { state, action, next, value } => {
                write!(f, "P[{state}][{action}][{next}] = {value} is negative")
            }
            Violation::NonFiniteProbability { state, action, next } => {
                write!(f, "P[{state}][{action}][{next}] is not finite")
            }
            Violation::RowSum { state, action, sum } => {
                write!(f, "P[{state}][{action}] sums to {sum}")
            }
            Violation::NonFiniteReward { state, action } => {
                write!(f, "r[{state}][{action}] is not finite")
            }
            Violation::Discount { gamma } => write!(f, "discount {gamma} is outside (0, 1)"),
        }
    }
}

/// Checks every MDP invariant on raw parts and reports all violations.
pub fn validate_parts(
    n_states: usize,
    n_actions: usize,
    transition: &[f64],
    reward: &[f64],
    gamma: f64,
) -> Vec<Violation> {
    let mut out = Vec::new();
    if n_states == 0 || n_actions == 0 {
        out.push(Violation::EmptySpace { n_states, n_actions });
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        out.push(Violation::Discount { gamma });
    }
    let t_len = n_states * n_actions * n_states;
    let r_len = n_states * n_actions;
    if transition.len() != t_len {
        out.push(Violation::TransitionShape { expected: t_len, found: transition.len() });
    } else {
        for s in 0..n_states {
            for a in 0..n_actions {
                let row = &transition[(s * n_actions + a) * n_states..][..n_states];
                let mut sum = 0.0;
                for (next, &p) in row.iter().enumerate() {
                    if !p.is_finite() {
                        out.push(Violation::NonFiniteProbability { state: s, action: a, next });
                    } else if p < 0.0 {
                        out.push(Violation::NegativeProbability {
                            state: s,
                            action: a,
                            next,
                            value: p,
                        });
                    }
                    sum += p;
                }
                if !(libm::fabs(sum - 1.0) <= PROB_TOL) {
                    out.push(Violation::RowSum { state: s, action: a, sum });
                }
            }
        }
    }
    if reward.len() != r_len {
        out.push(Violation::RewardShape { expected: r_len, found: reward.len() });
    } else {
        for (i, r) in reward.iter().enumerate() {
            if !r.is_finite() {
                out.push(Violation::NonFiniteReward { state: i / n_actions, action: i % n_actions });
            }
        }
    }
    out
}

impl FiniteMdp {
    /// Builds a validated MDP. `transition` is `P[s][a][s']` flattened in
    /// that order and `reward` is `r[s][a]`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        let violations = validate_parts(n_states, n_actions, &transition, &reward, gamma);
        if !violations.is_empty() {
            return Err(Error::InvalidMdp(violations));
        }
        Ok(Self { n_states, n_actions, transition, reward, gamma })
    }

    /// Builds an MDP whose every `(s, a)` leads deterministically to
    /// `successor[s][a]`.
    pub fn deterministic(
        n_states: usize,
        n_actions: usize,
        successor: &[usize],
        reward: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        check_dim("successor table", n_states * n_actions, successor.len())?;
        let mut transition = vec![0.0; n_states * n_actions * n_states];
        for (sa, &next) in successor.iter().enumerate() {
            if next >= n_states {
                return Err(Error::Validation(format!("successor {next} out of range")));
            }
            transition[sa * n_states + next] = 1.0;
        }
        Self::new(n_states, n_actions, transition, reward, gamma)
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Returns a copy with a different discount factor.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.n_states, self.n_actions, self.transition.clone(), self.reward.clone(), gamma)
    }

    /// `P[s][a][·]`.
    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        &self.transition[(s * self.n_actions + a) * self.n_states..][..self.n_states]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn transition_tensor(&self) -> &[f64] {
        &self.transition
    }

    pub fn reward_table(&self) -> &[f64] {
        &self.reward
    }

    pub fn max_abs_reward(&self) -> f64 {
        self.reward.iter().fold(0.0, |m, r| f64::max(m, libm::fabs(*r)))
    }

    /// True when every transition row is one-hot.
    pub fn is_deterministic(&self) -> bool {
        self.transition
            .chunks(self.n_states)
            .all(|row| row.iter().filter(|&&p| p != 0.0).count() == 1)
    }

    /// Draws a random MDP: dense rows normalized from uniform weights (or
    /// one-hot rows when `deterministic`), rewards uniform in `[0, 1)`.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        deterministic: bool,
    ) -> Result<Self> {
        let mut transition = vec![0.0; n_states * n_actions * n_states];
        for row in transition.chunks_mut(n_states) {
            if deterministic {
                row[rng.random_range(0..n_states)] = 1.0;
            } else {
                // Sparsify some entries so rows have varied support.
                for p in row.iter_mut() {
                    let w: f64 = rng.random();
                    *p = if w < 0.3 { 0.0 } else { w };
                }
                if row.iter().all(|&p| p == 0.0) {
                    row[rng.random_range(0..n_states)] = 1.0;
                }
                let total: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= total);
            }
        }
        let reward = (0..n_states * n_actions).map(|_| rng.random::<f64>()).collect();
        Self::new(n_states, n_actions, transition, reward, gamma)
    }
}

/// `validate_mdp`: re-checks an existing MDP, `Ok(())` when every invariant holds.
pub fn validate_mdp(mdp: &FiniteMdp) -> core::result::Result<(), Vec<Violation>> {
    let v = validate_parts(mdp.n_states, mdp.n_actions, &mdp.transition, &mdp.reward, mdp.gamma);
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

/// A stationary stochastic policy `π[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        check_dim("policy table", n_states * n_actions, probs.len())?;
        for (s, row) in probs.chunks(n_actions.max(1)).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) || libm::fabs(sum - 1.0) > PROB_TOL {
                return Err(Error::Validation(format!(
                    "policy row {s} is not a probability distribution (sum {sum})"
                )));
            }
        }
        Ok(Self { n_states, n_actions, probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// Deterministic policy taking `actions[s]` in state `s`.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::InvalidAction { action: a, n_actions });
            }
            probs[s * n_actions + a] = 1.0;
        }
        Ok(Self { n_states: actions.len(), n_actions, probs })
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_actions: usize) -> Self {
        let mut probs: Vec<f64> = (0..n_states * n_actions).map(|_| rng.random::<f64>() + 1e-3).collect();
        for row in probs.chunks_mut(n_actions) {
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= total);
        }
        Self { n_states, n_actions, probs }
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..][..self.n_actions]
    }

    pub fn table(&self) -> &[f64] {
        &self.probs
    }
}

fn check_shapes(mdp: &FiniteMdp, policy: &Policy) -> Result<()> {
    check_dim("policy states", mdp.n_states, policy.n_states)?;
    check_dim("policy actions", mdp.n_actions, policy.n_actions)
}

/// `r^π(s) = Σ_a π(a|s) r(s, a)`.
pub fn policy_reward(mdp: &FiniteMdp, policy: &Policy) -> Result<Vec<f64>> {
    check_shapes(mdp, policy)?;
    Ok((0..mdp.n_states)
        .map(|s| (0..mdp.n_actions).map(|a| policy.prob(s, a) * mdp.reward(s, a)).sum())
        .collect())
}

/// `P^π(s'|s) = Σ_a π(a|s) P(s'|s, a)`.
pub fn policy_transition(mdp: &FiniteMdp, policy: &Policy) -> Result<Matrix> {
    check_shapes(mdp, policy)?;
    let n = mdp.n_states;
    let mut out = Matrix::zeros(n, n);
    for s in 0..n {
        let row = out.row_mut(s);
        for a in 0..mdp.n_actions {
            let w = policy.prob(s, a);
            if w == 0.0 {
                continue;
            }
            for (o, p) in row.iter_mut().zip(mdp.transition_row(s, a)) {
                *o += w * p;
            }
        }
    }
    Ok(out)
}

/// Result of iterative policy evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueReport {
    pub values: Vec<f64>,
    /// Number of Bellman backups performed.
    pub iterations: usize,
    /// `‖V − (r^π + γ P^π V)‖∞` of the returned `values`.
    pub residual: f64,
}

/// Upper bound on the backups [`policy_value`] needs from `V₀ = 0`.
pub fn value_iteration_bound(gamma: f64, r_max: f64, tol: f64) -> usize {
    if r_max <= tol {
        return 1;
    }
    let k = libm::ceil(libm::log(tol * (1.0 - gamma) / r_max) / libm::log(gamma));
    k.max(0.0) as usize + 1
}

/// Evaluates `V^π` by value iteration from zero until the Bellman residual
/// of the returned vector is at most `tol`.
pub fn policy_value(mdp: &FiniteMdp, policy: &Policy, tol: f64) -> Result<ValueReport> {
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    let r = policy_reward(mdp, policy)?;
    let p = policy_transition(mdp, policy)?;
    let gamma = mdp.gamma;
    let n = mdp.n_states;
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    loop {
        for s in 0..n {
            next[s] = r[s] + gamma * crate::linalg::dot(p.row(s), &v);
        }
        iterations += 1;
        let residual = v.iter().zip(&next).fold(0.0, |m, (a, b)| f64::max(m, libm::fabs(a - b)));
        if residual <= tol {
            return Ok(ValueReport { values: v, iterations, residual });
        }
        core::mem::swap(&mut v, &mut next);
    }
}

/// Optimal action values `Q*[s][a]` by value iteration on the Bellman
/// optimality operator, stopped when the update falls below `tol`.
pub fn optimal_q(mdp: &FiniteMdp, tol: f64) -> Result<Matrix> {
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    let (n, m) = (mdp.n_states, mdp.n_actions);
    let mut v = vec![0.0; n];
    let mut q = Matrix::zeros(n, m);
    loop {
        for s in 0..n {
            for a in 0..m {
                q[(s, a)] = mdp.reward(s, a) + mdp.gamma * crate::linalg::dot(mdp.transition_row(s, a), &v);
            }
        }
        let mut delta: f64 = 0.0;
        for s in 0..n {
            let best = q.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max);
            delta = delta.max(libm::fabs(best - v[s]));
            v[s] = best;
        }
        if delta <= tol {
            return Ok(q);
        }
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// The deterministic policy that is greedy with respect to `q`.
pub fn greedy_policy(q: &Matrix) -> Policy {
    let actions: Vec<usize> = (0..q.rows()).map(|s| argmax(q.row(s))).collect();
    Policy::deterministic(q.cols(), &actions).expect("argmax is in range")
}
