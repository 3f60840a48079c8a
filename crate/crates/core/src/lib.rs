//! Behavioral metrics on finite MDPs and SimSR state-representation learning.
//!
//! The crate is `no_std` and only needs `alloc`. It contains:
//!
//! * exact fixed-point solvers for the deterministic and Wasserstein
//!   π-bisimulation operators and the independent-coupling (MICo / SimSR)
//!   operator ([`metric`], [`transport`]),
//! * a small MLP toolkit with hand-written gradients ([`nn`], [`optim`]),
//! * the unit-sphere encoder and its momentum twin ([`encoder`]),
//! * an ensemble of Gaussian latent dynamics heads ([`dynamics`]),
//! * the SimSR loss and training step ([`simsr`]),
//! * a discrete soft actor-critic on top of the encoder ([`agent`]),
//! * pixel gridworlds with distractors and a replay buffer ([`env`], [`buffer`]),
//! * the training / evaluation loops that tie everything together ([`run`]).
//!
//! File formats, configuration and the command-line front end live in the
//! companion `simsr` crate.

#![no_std]
#![deny(missing_debug_implementations)]
// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod agent;
pub mod buffer;
pub mod dynamics;
pub mod encoder;
pub mod env;
pub mod error;
pub mod gradcheck;
pub mod linalg;
pub mod mdp;
pub mod metric;
pub mod nn;
pub mod observation;
pub mod optim;
pub mod rng;
pub mod run;
pub mod simsr;
pub mod stats;
pub mod transport;

pub use error::{Error, Result};
pub use linalg::{DistanceMatrix, Matrix};
pub use mdp::{FiniteMdp, Policy};
