//! Plain-text MDP files.
//!
//! ```text
//! simsr-mdp 1
//! states 2
//! actions 1
//! gamma 0.5
//! rewards
//! 1
//! 0
//! transitions
//! 1 0
//! 0 1
//! ```
//!
//! `rewards` holds one line per state with one value per action.
//! `transitions` holds one line per `(state, action)` pair, state-major,
//! listing the probability of every next state. Blank lines and text after
//! `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use simsr_core::FiniteMdp;

use crate::error::{CliError, Result};

pub const HEADER: &str = "simsr-mdp";
pub const VERSION: u32 = 1;

fn err(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("mdp line {line}: {msg}"))
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        for (i, raw) in self.inner.by_ref() {
            let text = raw.split('#').next().unwrap_or("").trim();
            if !text.is_empty() {
                self.last = i + 1;
                return Ok((i + 1, text.split_whitespace().collect()));
            }
        }
        Err(err(self.last + 1, "unexpected end of file"))
    }

    fn keyword(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let (line, words) = self.next()?;
        if words[0] != key {
            return Err(err(line, format!("expected `{key}`, found `{}`", words[0])));
        }
        Ok(words[1..].to_vec())
    }

    fn value<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let line = self.last + 1;
        let words = self.keyword(key)?;
        match words.as_slice() {
            [v] => v.parse().map_err(|_| err(self.last, format!("bad value for `{key}`: {v}"))),
            _ => Err(err(line.max(self.last), format!("`{key}` takes exactly one value"))),
        }
    }

    fn row(&mut self, len: usize) -> Result<Vec<f64>> {
        let (line, words) = self.next()?;
        if words.len() != len {
            return Err(err(line, format!("expected {len} numbers, found {}", words.len())));
        }
        words.iter().map(|w| w.parse::<f64>().map_err(|_| err(line, format!("not a number: {w}")))).collect()
    }
}

pub fn parse(text: &str) -> Result<FiniteMdp> {
    let mut lines = Lines { inner: text.lines().enumerate(), last: 0 };
    let version: u32 = lines.value(HEADER)?;
    if version != VERSION {
        return Err(err(lines.last, format!("unsupported version {version}")));
    }
    let n: usize = lines.value("states")?;
    let m: usize = lines.value("actions")?;
    let gamma: f64 = lines.value("gamma")?;
    lines.keyword("rewards")?;
    let mut reward = Vec::with_capacity(n * m);
    for _ in 0..n {
        reward.extend(lines.row(m)?);
    }
    lines.keyword("transitions")?;
    let mut transition = Vec::with_capacity(n * m * n);
    for _ in 0..n * m {
        transition.extend(lines.row(n)?);
    }
    if let Ok((line, _)) = lines.next() {
        return Err(err(line, "trailing content"));
    }
    Ok(FiniteMdp::new(n, m, transition, reward, gamma)?)
}

pub fn render(mdp: &FiniteMdp) -> String {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let mut out = format!("{HEADER} {VERSION}\nstates {n}\nactions {m}\ngamma {}\nrewards\n", mdp.gamma());
    let join = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    for row in mdp.reward_table().chunks(m) {
        let _ = writeln!(out, "{}", join(row));
    }
    out.push_str("transitions\n");
    for row in mdp.transition_tensor().chunks(n) {
        let _ = writeln!(out, "{}", join(row));
    }
    out
}

pub fn read(path: &Path) -> Result<FiniteMdp> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text)
}

pub fn write(path: &Path, mdp: &FiniteMdp) -> Result<()> {
    std::fs::write(path, render(mdp)).map_err(|e| CliError::io(path, e))
}
