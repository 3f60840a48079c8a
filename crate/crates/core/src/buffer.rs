//! Fixed-capacity FIFO replay buffer with seeded uniform sampling.

use alloc::vec::Vec;

use rand::Rng;

use crate::env::Transition;
use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;

pub const DEFAULT_CAPACITY: usize = 100_000;

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    /// Slot overwritten by the next push once the buffer is full.
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        Self { capacity, items: Vec::new(), next: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends, evicting the oldest transition when full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
            self.next = (self.next + 1) % self.capacity;
        }
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.items.split_at(self.next);
        older.iter().chain(newer)
    }

    /// `n` transitions drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if self.items.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        Ok((0..n).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect())
    }

    pub fn sample_batch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Batch> {
        Batch::from_transitions(&self.sample(n, rng)?)
    }
}

/// Column-stacked transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub obs: Matrix,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_obs: Matrix,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn from_transitions<T: core::borrow::Borrow<Transition>>(ts: &[T]) -> Result<Self> {
        let first = ts.first().ok_or(Error::EmptyBuffer)?.borrow();
        let dim = first.obs.len();
        let mut obs = Vec::with_capacity(ts.len() * dim);
        let mut next_obs = Vec::with_capacity(ts.len() * dim);
        for t in ts {
            let t = t.borrow();
            check_dim("transition observation", dim, t.obs.len())?;
            check_dim("transition next observation", dim, t.next_obs.len())?;
            obs.extend_from_slice(&t.obs);
            next_obs.extend_from_slice(&t.next_obs);
        }
        Ok(Self {
            obs: Matrix::from_vec(ts.len(), dim, obs)?,
            actions: ts.iter().map(|t| t.borrow().action).collect(),
            rewards: ts.iter().map(|t| t.borrow().reward).collect(),
            next_obs: Matrix::from_vec(ts.len(), dim, next_obs)?,
            dones: ts.iter().map(|t| t.borrow().done).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}
