//! Configuration, file formats and the command-line runner for
//! [`simsr_core`].
//!
//! * [`config`]: the TOML [`RunConfig`](config::RunConfig),
//! * [`mdp_format`]: the `simsr-mdp 1` text format,
//! * [`checkpoint`]: binary network checkpoints,
//! * [`commands`]: `solve-metric`, `train`, `eval-metric-quality` and
//!   `transfer`, usable as library calls.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod mdp_format;
pub mod output;

pub use config::RunConfig;
pub use error::{CliError, Result};
pub use simsr_core as core;
