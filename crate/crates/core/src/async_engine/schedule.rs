//! Seeded delay and activation models for the simulated asynchronous run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Message delivery delay, in global steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayModel {
    /// Every message is visible at the next step.
    Zero,
    /// Delays drawn uniformly from `0..=max_delay`. A value current at step
    /// `k - max_delay` is always visible at step `k`.
    BoundedRandom { seed: u64, max_delay: u64 },
}

impl DelayModel {
    pub fn max_delay(&self) -> u64 {
        match self {
            DelayModel::Zero => 0,
            DelayModel::BoundedRandom { max_delay, .. } => *max_delay,
        }
    }

    pub(crate) fn sampler(&self) -> DelaySampler {
        match *self {
            DelayModel::Zero => DelaySampler { rng: None, max: 0 },
            DelayModel::BoundedRandom { seed, max_delay } => DelaySampler {
                rng: Some(ChaCha8Rng::seed_from_u64(seed)),
                max: max_delay,
            },
        }
    }
}

pub(crate) struct DelaySampler {
    rng: Option<ChaCha8Rng>,
    max: u64,
}

impl DelaySampler {
    pub(crate) fn next(&mut self) -> u64 {
        match &mut self.rng {
            None => 0,
            Some(rng) => rng.gen_range(0..=self.max),
        }
    }
}

/// Which workers update at each global step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationPolicy {
    /// Every worker at every step.
    AllActive,
    /// One worker per step, chosen at random subject to every worker
    /// appearing in every `window` consecutive activations.
    WindowFair { seed: u64, window: usize },
}

impl ActivationPolicy {
    pub(crate) fn scheduler(&self, p: usize) -> Result<Activations> {
        match *self {
            ActivationPolicy::AllActive => Ok(Activations::All(p)),
            ActivationPolicy::WindowFair { seed, window } => {
                if window < p {
                    return Err(Error::invalid(format!(
                        "fairness window {window} smaller than worker count {p}"
                    )));
                }
                Ok(Activations::Fair(Box::new(WindowFairScheduler::new(seed, window, p))))
            }
        }
    }
}

pub(crate) enum Activations {
    All(usize),
    Fair(Box<WindowFairScheduler>),
}

impl Activations {
    pub(crate) fn next_set(&mut self) -> Vec<usize> {
        match self {
            Activations::All(p) => (0..*p).collect(),
            Activations::Fair(s) => vec![s.next_worker()],
        }
    }
}

/// Random sequence of worker ids where each id occurs at least once in any
/// `window` consecutive draws.
///
/// A uniformly drawn candidate is accepted only when the remaining deadlines
/// stay feasible under earliest-deadline-first; otherwise the worker with the
/// earliest deadline is taken.
pub(crate) struct WindowFairScheduler {
    rng: ChaCha8Rng,
    window: usize,
    // last position each worker may next appear at
    deadline: Vec<usize>,
    pos: usize,
}

impl WindowFairScheduler {
    pub(crate) fn new(seed: u64, window: usize, p: usize) -> Self {
        WindowFairScheduler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            window,
            deadline: vec![window - 1; p],
            pos: 0,
        }
    }

    fn feasible_without(&self, chosen: usize) -> bool {
        let mut rest: Vec<usize> = self
            .deadline
            .iter()
            .enumerate()
            .filter(|&(w, _)| w != chosen)
            .map(|(_, &d)| d)
            .collect();
        rest.sort_unstable();
        rest.iter()
            .enumerate()
            .all(|(m, &d)| d >= self.pos + 1 + m)
    }

    pub(crate) fn next_worker(&mut self) -> usize {
        let p = self.deadline.len();
        let candidate = self.rng.gen_range(0..p);
        let chosen = if self.feasible_without(candidate) {
            candidate
        } else {
            (0..p)
                .min_by_key(|&w| (self.deadline[w], w))
                .expect("at least one worker")
        };
        self.deadline[chosen] = self.pos + self.window;
        self.pos += 1;
        chosen
    }
}
