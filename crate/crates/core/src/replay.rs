//! Replay memory with delayed, episode-uniform rewards.
//!
//! Transitions are buffered during an episode without a reward. Once the
//! protocol has been evaluated, every transition of the episode receives the
//! same reward `-log(1 - F)` and the episode is appended to a bounded FIFO
//! memory. The best episode seen so far is kept aside and periodically
//! re-appended.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fidelities at or above `1 - FIDELITY_CLAMP` are clamped there before the
/// logarithm, capping the reward at about 27.6 (natural log).
pub const FIDELITY_CLAMP: f64 = 1e-12;

/// Rounding slack above 1 still accepted as a valid fidelity.
pub const FIDELITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Ten,
}

/// `R(F) = -log(1 - F)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RewardFn {
    pub base: LogBase,
}

impl RewardFn {
    pub fn reward(&self, fidelity: f64) -> Result<f64> {
        if !(0.0..=1.0 + FIDELITY_SLACK).contains(&fidelity) {
            return Err(Error::FidelityRangeError(fidelity));
        }
        let infidelity = (1.0 - fidelity).max(FIDELITY_CLAMP);
        Ok(match self.base {
            LogBase::Natural => -infidelity.ln(),
            LogBase::Ten => -infidelity.log10(),
        })
    }
}

/// A transition recorded during the rollout, before its reward is known.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: Vec<f64>,
    pub action: usize,
    pub next_state: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
}

/// Stamps every buffered step with the episode reward and marks the last
/// one terminal.
pub fn finalize_episode(buffer: Vec<Step>, fidelity: f64, reward_fn: &RewardFn) -> Result<Vec<Transition>> {
    if buffer.is_empty() {
        return Err(Error::EmptySetError("episode buffer"));
    }
    let reward = reward_fn.reward(fidelity)?;
    let last = buffer.len() - 1;
    Ok(buffer
        .into_iter()
        .enumerate()
        .map(|(i, s)| Transition {
            state: s.state,
            action: s.action,
            next_state: s.next_state,
            reward,
            terminal: i == last,
        })
        .collect())
}

/// Bounded FIFO of transitions.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    items: VecDeque<Transition>,
    inserted: u64,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            inserted: 0,
        }
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

    /// Total transitions ever appended, including evicted ones.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Appends an episode, evicting the oldest transitions beyond capacity.
    pub fn push_episode(&mut self, episode: &[Transition]) {
        for t in episode {
            if self.capacity == 0 {
                break;
            }
            if self.items.len() == self.capacity {
                self.items.pop_front();
            }
            self.items.push_back(t.clone());
            self.inserted += 1;
        }
    }

    /// `k` uniform draws with replacement.
    pub fn sample_minibatch<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if self.items.is_empty() {
            return Err(Error::EmptyMemoryError);
        }
        let n = self.items.len();
        Ok((0..k).map(|_| &self.items[rng.gen_range(0..n)]).collect())
    }
}

/// The highest-fidelity episode observed so far.
#[derive(Debug, Clone, Default)]
pub struct BestEpisode {
    pub transitions: Vec<Transition>,
    pub protocol: Vec<usize>,
    pub fidelity: f64,
    pub first_action: Option<usize>,
}

impl BestEpisode {
    pub fn is_empty(&self) -> bool {
        self.first_action.is_none()
    }

    /// Replaces the stored episode iff `fidelity` strictly exceeds the
    /// current best.
    pub fn update(&mut self, episode: &[Transition], protocol: &[usize], fidelity: f64) -> bool {
        if fidelity > self.fidelity {
            self.fidelity = fidelity;
            self.transitions = episode.to_vec();
            self.protocol = protocol.to_vec();
            self.first_action = protocol.first().copied();
            true
        } else {
            false
        }
    }
}

/// Re-appends the best episode when `episode_index` is a multiple of
/// `every`. Returns whether it fired.
pub fn reinject_best(mem: &mut ReplayMemory, best: &BestEpisode, episode_index: u64, every: u64) -> bool {
    if every == 0 || episode_index % every != 0 || best.is_empty() {
        return false;
    }
    mem.push_episode(&best.transitions);
    true
}
