//! Pixel gridworlds over a known finite MDP.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::FiniteMdp;
use crate::observation::{Clock, DistractorMode, ObservationEmitter};
use crate::rng::categorical;

pub const N_MOVES: usize = 4;
pub const DEFAULT_HORIZON: u64 = 100;
pub const DEFAULT_SCROLL_PERIOD: u64 = 4;

/// Actions in index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Up,
    Down,
    Left,
    Right,
}

impl Move {
    pub const ALL: [Move; N_MOVES] = [Move::Up, Move::Down, Move::Left, Move::Right];

    fn delta(self) -> (isize, isize) {
        match self {
            Move::Up => (-1, 0),
            Move::Down => (1, 0),
            Move::Left => (0, -1),
            Move::Right => (0, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub height: usize,
    pub width: usize,
    /// `(row, col)` of the rewarding cell.
    pub goal: (usize, usize),
    pub start: (usize, usize),
    /// Multiplies the unit goal reward.
    pub reward_scale: f64,
    pub horizon: u64,
    /// Discount attached to the ground-truth MDP; the env itself does not discount.
    pub gamma: f64,
    pub distractor: DistractorMode,
    pub distractor_seed: u64,
    pub scroll_period: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            height: 3,
            width: 3,
            goal: (2, 2),
            start: (0, 0),
            reward_scale: 1.0,
            horizon: DEFAULT_HORIZON,
            gamma: 0.99,
            distractor: DistractorMode::None,
            distractor_seed: 0,
            scroll_period: DEFAULT_SCROLL_PERIOD,
        }
    }
}

impl GridSpec {
    pub fn n_states(&self) -> usize {
        self.height * self.width
    }

    pub fn index(&self, (r, c): (usize, usize)) -> usize {
        r * self.width + c
    }

    pub fn cell(&self, state: usize) -> (usize, usize) {
        (state / self.width, state % self.width)
    }

    fn validate(&self) -> Result<()> {
        let inside = |(r, c): (usize, usize)| r < self.height && c < self.width;
        if self.height == 0 || self.width == 0 {
            return Err(Error::Validation("grid must be nonempty".into()));
        }
        if !inside(self.goal) || !inside(self.start) {
            return Err(Error::Validation(format!(
                "goal {:?} and start {:?} must lie in the {}x{} grid",
                self.goal, self.start, self.height, self.width
            )));
        }
        if !self.reward_scale.is_finite() || self.horizon == 0 {
            return Err(Error::Validation("reward_scale must be finite and horizon positive".into()));
        }
        Ok(())
    }

    /// Deterministic moves, off-grid moves are self-loops, and the reward
    /// is `reward_scale` for any action taken in the goal cell.
    pub fn mdp(&self) -> Result<FiniteMdp> {
        self.validate()?;
        let n = self.n_states();
        let mut successor = Vec::with_capacity(n * N_MOVES);
        let mut reward = Vec::with_capacity(n * N_MOVES);
        let goal = self.index(self.goal);
        for s in 0..n {
            let (r, c) = self.cell(s);
            for mv in Move::ALL {
                let (dr, dc) = mv.delta();
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                let next = if nr >= 0 && nc >= 0 && (nr as usize) < self.height && (nc as usize) < self.width {
                    self.index((nr as usize, nc as usize))
                } else {
                    s
                };
                successor.push(next);
                reward.push(if s == goal { self.reward_scale } else { 0.0 });
            }
        }
        FiniteMdp::deterministic(n, N_MOVES, &successor, reward, self.gamma)
    }

    /// Agent position as a single bright pixel on an `height × width` image.
    pub fn emitter(&self) -> Result<ObservationEmitter> {
        let n = self.n_states();
        let clean = (0..n).map(|s| (0..n).map(|i| f64::from(u8::from(i == s))).collect()).collect();
        ObservationEmitter::new(clean, self.width, self.distractor, self.distractor_seed, self.scroll_period)
    }
}

/// One environment step `(x_t, a_t, r_{t+1}, x_{t+1})`.
///
/// `done` marks the time limit. The underlying MDP has no terminal states,
/// so learners keep bootstrapping through it.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct GridWorld {
    spec: GridSpec,
    mdp: FiniteMdp,
    emitter: ObservationEmitter,
    state: usize,
    clock: Clock,
    episodes_started: u64,
}

impl GridWorld {
    pub fn new(spec: GridSpec) -> Result<Self> {
        let mdp = spec.mdp()?;
        let emitter = spec.emitter()?;
        let state = spec.index(spec.start);
        let mut env = Self { spec, mdp, emitter, state, clock: Clock::default(), episodes_started: 0 };
        env.reset();
        Ok(env)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn mdp(&self) -> &FiniteMdp {
        &self.mdp
    }

    pub fn emitter(&self) -> &ObservationEmitter {
        &self.emitter
    }

    pub fn obs_dim(&self) -> usize {
        self.emitter.obs_dim()
    }

    pub fn n_actions(&self) -> usize {
        N_MOVES
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    /// Starts the next episode at the start cell and returns its observation.
    pub fn reset(&mut self) -> Vec<f64> {
        self.state = self.spec.index(self.spec.start);
        self.clock = Clock { episode: self.episodes_started, step: 0 };
        self.episodes_started += 1;
        self.observe()
    }

    pub fn observe(&self) -> Vec<f64> {
        self.emitter.emit(self.state, self.clock)
    }

    pub fn render(&self, state: usize, clock: Clock) -> Vec<f64> {
        self.emitter.emit(state, clock)
    }

    /// Samples the next state from the MDP row and advances the clock.
    pub fn step<R: Rng + ?Sized>(&mut self, action: usize, rng: &mut R) -> Result<Transition> {
        if action >= N_MOVES {
            return Err(Error::InvalidAction { action, n_actions: N_MOVES });
        }
        let obs = self.observe();
        let reward = self.mdp.reward(self.state, action);
        self.state = categorical(rng, self.mdp.transition_row(self.state, action));
        self.clock.step += 1;
        let next_obs = self.observe();
        Ok(Transition { obs, action, reward, next_obs, done: self.clock.step >= self.spec.horizon })
    }
}

/// The exact MDP behind an environment and the inverse of its clean rendering.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub mdp: FiniteMdp,
    lookup: BTreeMap<Vec<u64>, usize>,
    clean_dim: usize,
}

impl GroundTruth {
    /// Recovers the state from an observation's clean channel.
    pub fn state_of(&self, obs: &[f64]) -> Option<usize> {
        let key: Vec<u64> = obs.get(..self.clean_dim)?.iter().map(|x| x.to_bits()).collect();
        self.lookup.get(&key).copied()
    }
}

pub fn ground_truth_bundle(env: &GridWorld) -> GroundTruth {
    let em = env.emitter();
    let lookup = (0..em.n_states())
        .map(|s| (em.clean(s).iter().map(|x| x.to_bits()).collect(), s))
        .collect();
    GroundTruth { mdp: env.mdp().clone(), lookup, clean_dim: em.clean_dim() }
}

/// Expected undiscounted return over `horizon` steps from `start` under a
/// policy, by backward induction. Test and report oracle.
pub fn finite_horizon_return(mdp: &FiniteMdp, policy: &crate::mdp::Policy, start: usize, horizon: u64) -> Result<f64> {
    let r = crate::mdp::policy_reward(mdp, policy)?;
    let p = crate::mdp::policy_transition(mdp, policy)?;
    let mut v = vec![0.0; mdp.n_states()];
    for _ in 0..horizon {
        v = (0..mdp.n_states()).map(|s| r[s] + crate::linalg::dot(p.row(s), &v)).collect();
    }
    Ok(v[start])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::Policy;
    use crate::rng::seeded;

    #[test]
    fn moves_rewards_and_walls() {
        let mut env = GridWorld::new(GridSpec::default()).unwrap();
        let mut rng = seeded(0);
        let t = env.step(3, &mut rng).unwrap();
        assert_eq!(env.state(), 1);
        assert_eq!(t.reward, 0.0);

        let mut env = GridWorld::new(GridSpec { start: (1, 0), ..GridSpec::default() }).unwrap();
        env.step(2, &mut rng).unwrap();
        assert_eq!(env.state(), 3);

        let spec = GridSpec { start: (2, 2), reward_scale: 0.25, ..GridSpec::default() };
        let mut env = GridWorld::new(spec).unwrap();
        assert_eq!(env.step(0, &mut rng).unwrap().reward, 0.25);
        assert!(matches!(env.step(4, &mut rng), Err(Error::InvalidAction { .. })));
    }

    #[test]
    fn episode_ends_at_horizon() {
        let mut env = GridWorld::new(GridSpec { horizon: 3, ..GridSpec::default() }).unwrap();
        let mut rng = seeded(1);
        let dones: Vec<bool> = (0..3).map(|_| env.step(0, &mut rng).unwrap().done).collect();
        assert_eq!(dones, [false, false, true]);
        env.reset();
        assert_eq!(env.clock(), Clock { episode: 1, step: 0 });
    }

    #[test]
    fn ground_truth_bundle_inverts_rendering() {
        for mode in [DistractorMode::None, DistractorMode::ScrollingPattern, DistractorMode::StaticNoise] {
            let env = GridWorld::new(GridSpec { distractor: mode, ..GridSpec::default() }).unwrap();
            let gt = ground_truth_bundle(&env);
            assert_eq!(gt.mdp.n_states(), 9);
            assert_eq!(gt.mdp.n_actions(), 4);
            assert_eq!(&gt.mdp, GridWorld::new(GridSpec::default()).unwrap().mdp());
            for s in 0..9 {
                assert_eq!(gt.state_of(&env.render(s, Clock { episode: 5, step: 3 })), Some(s));
            }
        }
    }

    #[test]
    fn distractor_ignores_actions() {
        let spec = GridSpec { distractor: DistractorMode::ScrollingPattern, distractor_seed: 7, ..GridSpec::default() };
        let frames = |actions: &[usize]| -> Vec<Vec<f64>> {
            let mut env = GridWorld::new(spec.clone()).unwrap();
            let mut rng = seeded(3);
            actions.iter().map(|&a| env.step(a, &mut rng).unwrap().next_obs[9..].to_vec()).collect()
        };
        assert_eq!(frames(&[0, 1, 2, 3, 3, 1]), frames(&[3, 3, 3, 1, 0, 2]));
    }

    #[test]
    fn monte_carlo_return_matches_backward_induction() {
        let spec = GridSpec { horizon: 20, ..GridSpec::default() };
        let mut env = GridWorld::new(spec.clone()).unwrap();
        let pi = Policy::uniform(9, 4);
        let exact = finite_horizon_return(env.mdp(), &pi, 0, 20).unwrap();
        let mut rng = seeded(99);
        let episodes = 1000;
        let mut returns = Vec::with_capacity(episodes);
        for _ in 0..episodes {
            env.reset();
            let mut total = 0.0;
            loop {
                let a = rng.random_range(0..4);
                let t = env.step(a, &mut rng).unwrap();
                total += t.reward;
                if t.done {
                    break;
                }
            }
            returns.push(total);
        }
        let mean = returns.iter().sum::<f64>() / episodes as f64;
        let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (episodes - 1) as f64;
        let se = libm::sqrt(var / episodes as f64);
        assert!((mean - exact).abs() <= 3.0 * se, "{mean} vs {exact} (se {se})");
    }
}
