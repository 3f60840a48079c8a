//! Deterministic rendering of latent states into observation vectors, with
//! optional task-irrelevant distractor pixels.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DistractorMode {
    #[default]
    None,
    /// A random image drawn once per episode.
    StaticNoise,
    /// Diagonal stripes that shift by one pixel every step.
    ScrollingPattern,
}

impl DistractorMode {
    pub fn name(self) -> &'static str {
        match self {
            DistractorMode::None => "none",
            DistractorMode::StaticNoise => "static_noise",
            DistractorMode::ScrollingPattern => "scrolling_pattern",
        }
    }
}

/// State-independent time: which episode, and the step within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Clock {
    pub episode: u64,
    pub step: u64,
}

/// Number of static-noise episodes used as representative frames.
pub const NOISE_PHASES: u64 = 8;

/// Maps a state index to `clean(state) ⊕ distractor(clock)`.
///
/// The clean channel alone identifies the state; the distractor channel is
/// a pure function of `(clock, seed)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationEmitter {
    clean: Vec<Vec<f64>>,
    width: usize,
    mode: DistractorMode,
    seed: u64,
    period: u64,
}

impl ObservationEmitter {
    /// `clean[s]` is the rendering of state `s` as an image `width` pixels
    /// wide. Fails unless renderings are distinct, equally sized and in `[0, 1]`.
    pub fn new(clean: Vec<Vec<f64>>, width: usize, mode: DistractorMode, seed: u64, period: u64) -> Result<Self> {
        let dim = clean.first().map_or(0, Vec::len);
        if dim == 0 || width == 0 || dim % width != 0 {
            return Err(Error::Validation(format!("bad image geometry: {dim} pixels, width {width}")));
        }
        if period == 0 {
            return Err(Error::Validation("distractor period must be positive".into()));
        }
        for (s, img) in clean.iter().enumerate() {
            check_dim("clean rendering", dim, img.len())?;
            if img.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Validation(format!("rendering of state {s} leaves [0, 1]")));
            }
        }
        for a in 0..clean.len() {
            for b in a + 1..clean.len() {
                if clean[a] == clean[b] {
                    return Err(Error::Validation(format!("states {a} and {b} render identically")));
                }
            }
        }
        Ok(Self { clean, width, mode, seed, period })
    }

    pub fn n_states(&self) -> usize {
        self.clean.len()
    }

    pub fn clean_dim(&self) -> usize {
        self.clean[0].len()
    }

    pub fn mode(&self) -> DistractorMode {
        self.mode
    }

    pub fn obs_dim(&self) -> usize {
        match self.mode {
            DistractorMode::None => self.clean_dim(),
            _ => 2 * self.clean_dim(),
        }
    }

    pub fn clean(&self, state: usize) -> &[f64] {
        &self.clean[state]
    }

    /// Distractor pixels at `clock`; empty when there is no distractor.
    pub fn distractor(&self, clock: Clock) -> Vec<f64> {
        let dim = self.clean_dim();
        match self.mode {
            DistractorMode::None => Vec::new(),
            DistractorMode::StaticNoise => {
                let mut rng = seeded(derive_seed(self.seed, clock.episode));
                (0..dim).map(|_| rng.random::<f64>()).collect()
            }
            DistractorMode::ScrollingPattern => {
                let offset = derive_seed(self.seed, clock.episode) % self.period;
                let phase = (clock.step + offset) % self.period;
                (0..dim)
                    .map(|i| {
                        let (r, c) = ((i / self.width) as u64, (i % self.width) as u64);
                        let k = (r + c + phase) % self.period;
                        let angle = 2.0 * core::f64::consts::PI * k as f64 / self.period as f64;
                        0.5 + 0.5 * libm::cos(angle)
                    })
                    .collect()
            }
        }
    }

    pub fn emit(&self, state: usize, clock: Clock) -> Vec<f64> {
        let mut obs = self.clean[state].clone();
        obs.extend(self.distractor(clock));
        obs
    }

    /// Clocks whose distractor frames stand for the distractor's variety:
    /// every scroll phase, a handful of noise episodes, or a single frame.
    pub fn representative_clocks(&self) -> Vec<Clock> {
        match self.mode {
            DistractorMode::None => alloc::vec![Clock::default()],
            DistractorMode::StaticNoise => (0..NOISE_PHASES).map(|episode| Clock { episode, step: 0 }).collect(),
            DistractorMode::ScrollingPattern => (0..self.period).map(|step| Clock { episode: 0, step }).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|s| (0..n).map(|i| f64::from(u8::from(i == s))).collect()).collect()
    }

    #[test]
    fn rejects_colliding_renderings() {
        let mut imgs = one_hot(4);
        imgs[3] = imgs[1].clone();
        assert!(ObservationEmitter::new(imgs, 2, DistractorMode::None, 0, 4).is_err());
        let mut bright = one_hot(4);
        bright[0][0] = 1.5;
        assert!(ObservationEmitter::new(bright, 2, DistractorMode::None, 0, 4).is_err());
    }

    #[test]
    fn emissions_are_injective_and_bounded_for_every_mode() {
        for mode in [DistractorMode::None, DistractorMode::StaticNoise, DistractorMode::ScrollingPattern] {
            let em = ObservationEmitter::new(one_hot(9), 3, mode, 42, 4).unwrap();
            for clock in [Clock { episode: 0, step: 0 }, Clock { episode: 3, step: 17 }] {
                let obs: Vec<Vec<f64>> = (0..9).map(|s| em.emit(s, clock)).collect();
                for (a, oa) in obs.iter().enumerate() {
                    assert_eq!(oa.len(), em.obs_dim());
                    assert!(oa.iter().all(|p| (0.0..=1.0).contains(p)));
                    for ob in &obs[a + 1..] {
                        assert_ne!(oa[..9], ob[..9]);
                    }
                }
            }
        }
    }

    #[test]
    fn scrolling_pattern_cycles_through_period() {
        let em = ObservationEmitter::new(one_hot(9), 3, DistractorMode::ScrollingPattern, 1, 4).unwrap();
        let frames: Vec<Vec<f64>> = (0..8).map(|step| em.distractor(Clock { episode: 2, step })).collect();
        assert_eq!(frames[0], frames[4]);
        assert_ne!(frames[0], frames[1]);
        assert_eq!(em.representative_clocks().len(), 4);
    }

    #[test]
    fn static_noise_is_fixed_within_an_episode() {
        let em = ObservationEmitter::new(one_hot(4), 2, DistractorMode::StaticNoise, 9, 4).unwrap();
        let a = em.distractor(Clock { episode: 1, step: 0 });
        assert_eq!(a, em.distractor(Clock { episode: 1, step: 50 }));
        assert_ne!(a, em.distractor(Clock { episode: 2, step: 0 }));
    }
}
