use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::mdp::Violation;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two operands disagree on a dimension.
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    /// An MDP failed validation; every violation is listed.
    InvalidMdp(Vec<Violation>),
    /// Input rejected by a validation check.
    Validation(String),
    /// A vector that must be L2-normalized has (near) zero norm.
    Degenerate { norm: f64 },
    /// A fixed-point iteration hit its iteration budget.
    NotConverged { iterations: usize, residual: f64 },
    /// An operation was called outside its domain.
    Precondition(String),
    EmptyBuffer,
    InvalidAction { action: usize, n_actions: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension {
                context,
                expected,
                found,
            } => write!(f, "{context}: expected dimension {expected}, found {found}"),
            Error::InvalidMdp(violations) => {
                write!(f, "invalid MDP ({} violations)", violations.len())?;
                for v in violations.iter().take(8) {
                    write!(f, "; {v}")?;
                }
                Ok(())
            }
            Error::Validation(msg) => write!(f, "validation error: {msg}"),
            Error::Degenerate { norm } => {
                write!(f, "degenerate input: pre-normalization norm {norm:e}")
            }
            Error::NotConverged {
                iterations,
                residual,
            } => write!(
                f,
                "no convergence after {iterations} iterations (residual {residual:e})"
            ),
            Error::Precondition(msg) => write!(f, "precondition violated: {msg}"),
            Error::EmptyBuffer => f.write_str("replay buffer is empty"),
            Error::InvalidAction { action, n_actions } => {
                write!(f, "action {action} out of range for {n_actions} actions")
            }
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            found,
        })
    }
}
