//! DQL agents and the episodic training loop.
//!
//! The agent never sees the quantum system. Its observation at step `t` is
//! the last applied pulse scaled by `1/z` together with the elapsed fraction
//! `(t - 1)/N`. Each episode builds a whole protocol, hands it to the
//! environment once, and turns the single fidelity it gets back into a reward
//! shared by every transition of the episode.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{ActionSpace, BlackBox, ControlAction};
use crate::error::{Error, Result};
use crate::net::{copy_weights, Activation, Architecture, Checkpoint, GradientDescent, QNetwork, TrainSample};
use crate::replay::{finalize_episode, reinject_best, BestEpisode, LogBase, ReplayMemory, RewardFn, Step, Transition};
use crate::rng::{SeedStreams, Stream};

/// Exploitation caps: 0.95 below F = 0.99, 0.9999 below 0.999, then 0.99999.
pub const EPSILON_MAX_LOW: f64 = 0.95;
pub const EPSILON_MAX_MID: f64 = 0.9999;
pub const EPSILON_MAX_HIGH: f64 = 0.99999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParams {
    pub learning_rate: f64,
    pub discount: f64,
    pub episodes: u64,
    pub hidden_size: usize,
    pub memory_capacity: usize,
    pub batch_size: usize,
    /// Train the value network every this many control steps (global count).
    pub train_every_steps: u64,
    /// Copy value weights into the target network every this many episodes.
    pub target_update_every_episodes: u64,
    pub epsilon_step: f64,
    /// Divisor applied to control amplitudes in the observation.
    pub state_norm: f64,
    /// Re-append the best episode every this many episodes.
    pub best_reinject_every_episodes: u64,
    pub activation: Activation,
    pub log_base: LogBase,
    pub momentum: f64,
    pub grad_clip_norm: Option<f64>,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            discount: 0.95,
            episodes: 200_000,
            hidden_size: 512,
            memory_capacity: 25_000,
            batch_size: 64,
            train_every_steps: 10,
            target_update_every_episodes: 10,
            epsilon_step: 0.0001,
            state_norm: 40.0,
            best_reinject_every_episodes: 3,
            activation: Activation::Relu,
            log_base: LogBase::Natural,
            momentum: 0.0,
            grad_clip_norm: None,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::ConfigError(msg.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return bad("discount must lie in (0, 1]");
        }
        if self.hidden_size == 0 || self.memory_capacity == 0 || self.batch_size == 0 {
            return bad("hidden size, memory capacity and batch size must be positive");
        }
        if self.train_every_steps == 0
            || self.target_update_every_episodes == 0
            || self.best_reinject_every_episodes == 0
        {
            return bad("update intervals must be positive");
        }
        if !(self.epsilon_step > 0.0 && self.epsilon_step < 1.0) {
            return bad("epsilon step must lie in (0, 1)");
        }
        if !(self.state_norm > 0.0 && self.state_norm.is_finite()) {
            return bad("state normalization must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if let Some(c) = self.grad_clip_norm {
            if !(c > 0.0) {
                return bad("gradient clip norm must be positive");
            }
        }
        Ok(())
    }
}

/// Which DQL flavour to run: double targets and/or a dueling network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentVariant {
    pub double: bool,
    pub dueling: bool,
}

impl AgentVariant {
    pub const MDQL: Self = Self { double: false, dueling: false };
    pub const MDDQL: Self = Self { double: true, dueling: false };
    pub const MDUDQL: Self = Self { double: false, dueling: true };
    pub const MDUDDQL: Self = Self { double: true, dueling: true };

    pub const ALL: [Self; 4] = [Self::MDQL, Self::MDDQL, Self::MDUDQL, Self::MDUDDQL];

    pub fn name(self) -> &'static str {
        match (self.double, self.dueling) {
            (false, false) => "mdql",
            (true, false) => "mddql",
            (false, true) => "mdudql",
            (true, true) => "mduddql",
        }
    }
}

impl fmt::Display for AgentVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::ConfigError(format!("unknown variant `{s}`")))
    }
}

/// Exploitation probability and its cap.
///
/// `epsilon` is the probability of acting greedily. It grows by
/// `epsilon_step` once per episode until it reaches `epsilon_max`, and it is
/// tracked as a count of increments so the trajectory equals
/// `min(count * step, cap)` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonState {
    epsilon: f64,
    epsilon_max: f64,
    epsilon_step: f64,
    increments: u64,
}

impl EpsilonState {
    pub fn new(epsilon_step: f64) -> Self {
        Self {
            epsilon: 0.0,
            epsilon_max: EPSILON_MAX_LOW,
            epsilon_step,
            increments: 0,
        }
    }

    /// Fixed exploitation probability, for tests and evaluation.
    pub fn fixed(epsilon: f64) -> Self {
        Self {
            epsilon,
            epsilon_max: epsilon.max(EPSILON_MAX_LOW),
            epsilon_step: 0.0,
            increments: 0,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn epsilon_max(&self) -> f64 {
        self.epsilon_max
    }

    pub fn epsilon_step(&self) -> f64 {
        self.epsilon_step
    }

    /// `epsilon <- min(epsilon + step, epsilon_max)`.
    pub fn update(&mut self) {
        if self.epsilon < self.epsilon_max {
            self.increments += 1;
            self.epsilon = (self.increments as f64 * self.epsilon_step).min(self.epsilon_max);
        } else {
            self.epsilon = self.epsilon.min(self.epsilon_max);
        }
    }

    /// Raises the cap according to the best fidelity found so far. The
    /// current `epsilon` carries over unchanged.
    pub fn update_max(&mut self, best_fidelity: f64) {
        self.epsilon_max = epsilon_max_for(best_fidelity);
    }
}

pub fn epsilon_max_for(best_fidelity: f64) -> f64 {
    if best_fidelity >= 0.999 {
        EPSILON_MAX_HIGH
    } else if best_fidelity >= 0.99 {
        EPSILON_MAX_MID
    } else {
        EPSILON_MAX_LOW
    }
}

/// Observation `[A_t / z, (t - 1) / N]` for step `t` in `1..=N`.
pub fn encode_state(action: &ControlAction, t: usize, horizon: usize, norm: f64) -> Result<Vec<f64>> {
    if t == 0 || t > horizon {
        return Err(Error::StepRangeError { t, horizon });
    }
    let mut s: Vec<f64> = action.values().iter().map(|u| u / norm).collect();
    s.push((t - 1) as f64 / horizon as f64);
    Ok(s)
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Opening pulse: with probability `epsilon` reuse the best episode's first
/// action (random while no best exists), otherwise pick uniformly.
pub fn select_first_action<R: Rng + ?Sized>(
    eps: &EpsilonState,
    best: &BestEpisode,
    action_count: usize,
    rng: &mut R,
) -> usize {
    let x: f64 = rng.gen();
    match best.first_action {
        Some(a) if x < eps.epsilon() => a,
        _ => rng.gen_range(0..action_count),
    }
}

/// Epsilon-greedy choice: greedy on the value network with probability
/// `epsilon`, uniform otherwise.
pub fn select_action<R: Rng + ?Sized>(
    net: &QNetwork,
    state: &[f64],
    eps: &EpsilonState,
    rng: &mut R,
) -> Result<usize> {
    let x: f64 = rng.gen();
    if x < eps.epsilon() {
        Ok(argmax(&net.forward(state)?))
    } else {
        Ok(rng.gen_range(0..net.architecture().output_dim))
    }
}

/// Bootstrapped targets for a minibatch.
///
/// Plain: `R + gamma * max_a Q_target(s', a)`. Double: the next action is
/// the value network's argmax, evaluated by the target network. Terminal
/// transitions do not bootstrap.
pub fn compute_targets(
    variant: AgentVariant,
    value_net: &QNetwork,
    target_net: &QNetwork,
    batch: &[&Transition],
    discount: f64,
) -> Result<Vec<f64>> {
    if value_net.architecture() != target_net.architecture() {
        return Err(Error::ShapeError(
            "value and target networks differ in architecture".into(),
        ));
    }
    batch
        .iter()
        .map(|t| {
            if t.terminal {
                return Ok(t.reward);
            }
            let q_next = target_net.forward(&t.next_state)?;
            let bootstrap = if variant.double {
                q_next[argmax(&value_net.forward(&t.next_state)?)]
            } else {
                q_next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            };
            Ok(t.reward + discount * bootstrap)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub fidelity: f64,
    pub reward: f64,
    /// Exploitation probability used during this episode.
    pub epsilon: f64,
    /// Cap in force during this episode.
    pub epsilon_max: f64,
    /// Best fidelity including this episode.
    pub best_fidelity: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingResult {
    pub log: Vec<EpisodeRecord>,
    pub best_protocol: Vec<usize>,
    pub best_fidelity: f64,
    pub first_action: Option<usize>,
    pub network: QNetwork,
    pub seed: u64,
    /// Number of value-network updates performed.
    pub updates: u64,
}

impl TrainingResult {
    pub fn checkpoint(&self) -> Checkpoint {
        self.network
            .to_checkpoint(self.seed, self.log.len() as u64, self.first_action)
    }
}

struct Trainer<'a, E: BlackBox + ?Sized> {
    env: &'a E,
    variant: AgentVariant,
    hp: &'a HyperParams,
    actions: Vec<ControlAction>,
    value_net: QNetwork,
    target_net: QNetwork,
    optimizer: GradientDescent,
    memory: ReplayMemory,
    best: BestEpisode,
    eps: EpsilonState,
    reward_fn: RewardFn,
    action_rng: rand_chacha::ChaCha8Rng,
    batch_rng: rand_chacha::ChaCha8Rng,
    steps: u64,
    updates: u64,
}

impl<'a, E: BlackBox + ?Sized> Trainer<'a, E> {
    fn new(env: &'a E, variant: AgentVariant, hp: &'a HyperParams, seed: u64) -> Result<Self> {
        hp.validate()?;
        let space: &ActionSpace = env.action_space();
        if env.horizon() == 0 {
            return Err(Error::ConfigError("horizon must be at least 1".into()));
        }
        let actions = (0..space.total_actions())
            .map(|i| space.action(i))
            .collect::<Result<Vec<_>>>()?;
        let arch = Architecture {
            input_dim: space.field_count() + 1,
            hidden_dim: hp.hidden_size,
            output_dim: actions.len(),
            dueling: variant.dueling,
            activation: hp.activation,
        };
        let streams = SeedStreams::new(seed);
        let value_net = QNetwork::new(arch, &mut streams.stream(Stream::Weights))?;
        let target_net = value_net.clone();
        Ok(Self {
            env,
            variant,
            hp,
            actions,
            value_net,
            target_net,
            optimizer: GradientDescent::plain(hp.learning_rate)
                .with_momentum(hp.momentum)
                .with_clip_norm(hp.grad_clip_norm),
            memory: ReplayMemory::new(hp.memory_capacity),
            best: BestEpisode::default(),
            eps: EpsilonState::new(hp.epsilon_step),
            reward_fn: RewardFn { base: hp.log_base },
            action_rng: streams.stream(Stream::Actions),
            batch_rng: streams.stream(Stream::Minibatch),
            steps: 0,
            updates: 0,
        })
    }

    fn observe(&self, action: usize, t: usize) -> Result<Vec<f64>> {
        encode_state(&self.actions[action], t, self.env.horizon(), self.hp.state_norm)
    }

    fn train_value_net(&mut self) -> Result<()> {
        let batch = self
            .memory
            .sample_minibatch(self.hp.batch_size, &mut self.batch_rng)?;
        let targets = compute_targets(
            self.variant,
            &self.value_net,
            &self.target_net,
            &batch,
            self.hp.discount,
        )?;
        let samples: Vec<TrainSample<'_>> = batch
            .iter()
            .zip(targets)
            .map(|(t, target)| TrainSample {
                state: &t.state,
                action: t.action,
                target,
            })
            .collect();
        self.optimizer.step(&mut self.value_net, &samples)?;
        self.updates += 1;
        Ok(())
    }

    fn run_episode(&mut self, episode: u64) -> Result<EpisodeRecord> {
        let horizon = self.env.horizon();
        let epsilon = self.eps.epsilon();
        let epsilon_max = self.eps.epsilon_max();

        let first = select_first_action(&self.eps, &self.best, self.actions.len(), &mut self.action_rng);
        let mut protocol = Vec::with_capacity(horizon);
        protocol.push(first);
        let mut state = self.observe(first, 1)?;
        let mut buffer = Vec::with_capacity(horizon.saturating_sub(1));

        for t in 2..=horizon {
            let action = select_action(&self.value_net, &state, &self.eps, &mut self.action_rng)?;
            let next_state = self.observe(action, t)?;
            buffer.push(Step {
                state: std::mem::replace(&mut state, next_state.clone()),
                action,
                next_state,
            });
            protocol.push(action);
            self.steps += 1;
            if self.steps % self.hp.train_every_steps == 0 && !self.memory.is_empty() {
                self.train_value_net()?;
            }
        }

        let fidelity = self.env.evaluate(&protocol)?;
        let reward = self.reward_fn.reward(fidelity)?;
        let transitions = if buffer.is_empty() {
            Vec::new()
        } else {
            finalize_episode(buffer, fidelity, &self.reward_fn)?
        };
        self.memory.push_episode(&transitions);
        self.best.update(&transitions, &protocol, fidelity);
        reinject_best(
            &mut self.memory,
            &self.best,
            episode,
            self.hp.best_reinject_every_episodes,
        );
        if episode % self.hp.target_update_every_episodes == 0 {
            copy_weights(&self.value_net, &mut self.target_net)?;
        }
        self.eps.update();
        self.eps.update_max(self.best.fidelity);

        Ok(EpisodeRecord {
            episode,
            fidelity,
            reward,
            epsilon,
            epsilon_max,
            best_fidelity: self.best.fidelity,
        })
    }
}

/// Runs `hp.episodes` episodes against `env`.
pub fn run_training<E: BlackBox + ?Sized>(
    env: &E,
    variant: AgentVariant,
    hp: &HyperParams,
    seed: u64,
) -> Result<TrainingResult> {
    run_training_with(env, variant, hp, seed, |_| Ok(()))
}

/// Like [`run_training`], calling `on_episode` after every episode so
/// callers can stream the log. An error from the callback stops training.
pub fn run_training_with<E, F>(
    env: &E,
    variant: AgentVariant,
    hp: &HyperParams,
    seed: u64,
    mut on_episode: F,
) -> Result<TrainingResult>
where
    E: BlackBox + ?Sized,
    F: FnMut(&EpisodeRecord) -> Result<()>,
{
    let mut trainer = Trainer::new(env, variant, hp, seed)?;
    let mut log = Vec::with_capacity(hp.episodes.min(1 << 20) as usize);
    for episode in 1..=hp.episodes {
        let record = trainer.run_episode(episode)?;
        on_episode(&record)?;
        log.push(record);
    }
    Ok(TrainingResult {
        log,
        best_protocol: trainer.best.protocol,
        best_fidelity: trainer.best.fidelity,
        first_action: trainer.best.first_action,
        network: trainer.value_net,
        seed,
        updates: trainer.updates,
    })
}

/// Greedy rollout of a trained network from a given opening action.
pub fn greedy_protocol(
    net: &QNetwork,
    space: &ActionSpace,
    horizon: usize,
    first_action: usize,
    state_norm: f64,
) -> Result<Vec<usize>> {
    if first_action >= space.total_actions() {
        return Err(Error::ActionIndexError {
            index: first_action,
            total: space.total_actions(),
        });
    }
    let mut protocol = vec![first_action];
    let mut state = encode_state(&space.action(first_action)?, 1, horizon, state_norm)?;
    for t in 2..=horizon {
        let a = argmax(&net.forward(&state)?);
        protocol.push(a);
        state = encode_state(&space.action(a)?, t, horizon, state_norm)?;
    }
    Ok(protocol)
}
