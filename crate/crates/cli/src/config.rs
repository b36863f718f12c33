//! Run configuration files.
//!
//! A config is a flat TOML table. Only `task` is required; every other key
//! falls back to the defaults of the chosen task and the standard
//! hyperparameters. Relative paths are resolved against the directory of
//! the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qdql_core::agent::{AgentVariant, HyperParams};
use qdql_core::envs::{ActionSpace, HamiltonianModel, TaskConfig, TaskKind, TaskPreset};
use qdql_core::net::Activation;
use qdql_core::qmath::{circuit_operator, Gate};
use qdql_core::replay::LogBase;
use qdql_core::stategen::{gen_testing_states, gen_training_states, gen_two_qubit_states_as, StateSet, StateSetKind};

use crate::error::{CliError, Result};

/// Default sizes of generated training sets.
pub const SINGLE_QUBIT_TRAINING_STATES: usize = 100;
pub const TWO_QUBIT_TRAINING_STATES: usize = 50;
/// Single-qubit testing states the two-qubit products are drawn from.
pub const DEFAULT_POOL_SIZE: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CustomKind {
    GateDesign,
    ComposedGate,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `hadamard | cnot | tx | ty | bitflip | bell | custom`.
    pub task: String,
    pub variant: Option<String>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,

    pub horizon_pulses: Option<usize>,
    pub evolution_time: Option<f64>,
    /// Amplitudes allowed for each switchable control field.
    pub control_values: Option<Vec<f64>>,

    pub episodes: Option<u64>,
    pub learning_rate: Option<f64>,
    pub discount: Option<f64>,
    pub hidden_units: Option<usize>,
    pub memory_capacity_transitions: Option<usize>,
    pub batch_size_transitions: Option<usize>,
    pub train_every_steps: Option<u64>,
    pub target_update_every_episodes: Option<u64>,
    pub epsilon_step_per_episode: Option<f64>,
    pub state_norm: Option<f64>,
    pub best_reinject_every_episodes: Option<u64>,
    pub activation: Option<Activation>,
    pub reward_log_base: Option<LogBase>,
    pub momentum: Option<f64>,
    pub grad_clip_norm: Option<f64>,

    pub training_states_path: Option<PathBuf>,
    pub training_state_count: Option<usize>,
    pub state_pool_size: Option<usize>,
    pub state_seed: Option<u64>,

    pub custom_kind: Option<CustomKind>,
    /// Target as a gate sequence in circuit order (first gate acts first).
    pub custom_target_gates: Option<Vec<String>>,
}

/// A config with every default filled in.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub task_name: String,
    pub task: TaskConfig,
    pub variant: AgentVariant,
    pub hp: HyperParams,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub training_states: Option<StateSet>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    /// Reads a config, resolving relative paths against its directory and
    /// checking that every referenced file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(p) = cfg.training_states_path.take() {
            let p = if p.is_relative() { base.join(p) } else { p };
            if !p.is_file() {
                return Err(CliError::Config(format!(
                    "training states file {} does not exist",
                    p.display()
                )));
            }
            cfg.training_states_path = Some(p);
        }
        if let Some(p) = cfg.output_dir.take() {
            cfg.output_dir = Some(if p.is_relative() { base.join(p) } else { p });
        }
        Ok(cfg)
    }

    pub fn hyperparams(&self) -> Result<HyperParams> {
        let d = HyperParams::default();
        let hp = HyperParams {
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            discount: self.discount.unwrap_or(d.discount),
            episodes: self.episodes.unwrap_or(d.episodes),
            hidden_size: self.hidden_units.unwrap_or(d.hidden_size),
            memory_capacity: self.memory_capacity_transitions.unwrap_or(d.memory_capacity),
            batch_size: self.batch_size_transitions.unwrap_or(d.batch_size),
            train_every_steps: self.train_every_steps.unwrap_or(d.train_every_steps),
            target_update_every_episodes: self
                .target_update_every_episodes
                .unwrap_or(d.target_update_every_episodes),
            epsilon_step: self.epsilon_step_per_episode.unwrap_or(d.epsilon_step),
            state_norm: self.state_norm.unwrap_or(d.state_norm),
            best_reinject_every_episodes: self
                .best_reinject_every_episodes
                .unwrap_or(d.best_reinject_every_episodes),
            activation: self.activation.unwrap_or(d.activation),
            log_base: self.reward_log_base.unwrap_or(d.log_base),
            momentum: self.momentum.unwrap_or(d.momentum),
            grad_clip_norm: self.grad_clip_norm.or(d.grad_clip_norm),
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn variant(&self) -> Result<AgentVariant> {
        match &self.variant {
            None => Ok(AgentVariant::MDDQL),
            Some(v) => Ok(v.parse()?),
        }
    }

    /// The task with horizon, time and amplitude overrides applied.
    pub fn task_config(&self) -> Result<TaskConfig> {
        let mut task = if self.task.eq_ignore_ascii_case("custom") {
            self.custom_task()?
        } else {
            if self.custom_kind.is_some() || self.custom_target_gates.is_some() {
                return Err(CliError::Config(
                    "custom_* keys are only valid with task = \"custom\"".into(),
                ));
            }
            TaskConfig::preset(self.task.parse::<TaskPreset>()?)
        };
        if let Some(n) = self.horizon_pulses {
            task.horizon = n;
        }
        if let Some(t) = self.evolution_time {
            task.total_time = t;
        }
        if let Some(values) = &self.control_values {
            task.actions = action_space(task.model, values)?;
        }
        task.validate()?;
        Ok(task)
    }

    fn custom_task(&self) -> Result<TaskConfig> {
        let (Some(kind), Some(names)) = (self.custom_kind, &self.custom_target_gates) else {
            return Err(CliError::Config(
                "task = \"custom\" needs custom_kind and custom_target_gates".into(),
            ));
        };
        let gates = names
            .iter()
            .map(|n| n.parse::<Gate>())
            .collect::<qdql_core::Result<Vec<_>>>()?;
        let qubits = gates.first().map(|g| g.qubits()).unwrap_or(1);
        if gates.iter().any(|g| g.qubits() != qubits) {
            return Err(CliError::Config(
                "custom target mixes one- and two-qubit gates".into(),
            ));
        }
        let target = circuit_operator(&gates)?;
        let base = TaskConfig::preset(if qubits == 1 {
            TaskPreset::Hadamard
        } else {
            TaskPreset::Cnot
        });
        let kind = match kind {
            CustomKind::GateDesign => TaskKind::GateDesign { target },
            CustomKind::ComposedGate => TaskKind::ComposedGateCalibration { target },
        };
        Ok(TaskConfig { kind, ..base })
    }

    pub fn resolve(&self) -> Result<ResolvedRun> {
        let task = self.task_config()?;
        let seed = self.seed.unwrap_or(0);
        let training_states = self.training_states(&task)?;
        Ok(ResolvedRun {
            task_name: self.task.to_ascii_lowercase(),
            variant: self.variant()?,
            hp: self.hyperparams()?,
            seed,
            output_dir: self.output_dir.clone(),
            training_states,
            task,
        })
    }

    fn training_states(&self, task: &TaskConfig) -> Result<Option<StateSet>> {
        if !task.kind.uses_states() {
            if self.training_states_path.is_some() || self.training_state_count.is_some() {
                return Err(CliError::Config(
                    "gate-design tasks take no training states".into(),
                ));
            }
            return Ok(None);
        }
        let set = match &self.training_states_path {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(CliError::io(path))?;
                StateSet::from_json(&text).map_err(|e| CliError::parse(path, e))?
            }
            None if task.qubits() == 1 => {
                gen_training_states(self.training_state_count.unwrap_or(SINGLE_QUBIT_TRAINING_STATES))
            }
            None => two_qubit_set(
                self.training_state_count.unwrap_or(TWO_QUBIT_TRAINING_STATES),
                self.state_pool_size.unwrap_or(DEFAULT_POOL_SIZE),
                self.state_seed.unwrap_or(0),
                StateSetKind::Training,
            )?,
        };
        if set.is_empty() {
            return Err(CliError::Config("training state set is empty".into()));
        }
        if set.dim() != Some(task.dim()) {
            return Err(CliError::TaskMismatch(format!(
                "training states have dimension {} but the task needs {}",
                set.dim().unwrap_or(0),
                task.dim()
            )));
        }
        Ok(Some(set))
    }
}

/// Rebuilds the action space of `model` with new switchable amplitudes.
pub fn action_space(model: HamiltonianModel, values: &[f64]) -> Result<ActionSpace> {
    if values.is_empty() {
        return Err(CliError::Config("control_values must not be empty".into()));
    }
    let space = match model {
        HamiltonianModel::SingleQubit { fix_u0: Some(u0) } => {
            ActionSpace::new(vec![vec![u0], values.to_vec()])?
        }
        HamiltonianModel::SingleQubit { fix_u0: None } => {
            ActionSpace::new(vec![values.to_vec(), values.to_vec()])?
        }
        HamiltonianModel::TwoQubit => ActionSpace::uniform(4, values)?,
    };
    Ok(space)
}

/// Two-qubit product states drawn from a seeded single-qubit testing pool.
/// The pool uses `seed`, the product draws `seed + 1`.
pub fn two_qubit_set(count: usize, pool_size: usize, seed: u64, kind: StateSetKind) -> Result<StateSet> {
    if count == 0 || pool_size == 0 {
        return Err(CliError::Config("state counts must be positive".into()));
    }
    let pool = gen_testing_states(pool_size, seed);
    Ok(gen_two_qubit_states_as(&pool, count, seed.wrapping_add(1), kind)?)
}

/// `--task` accepts a preset name or the path of a config file.
pub fn task_from_arg(arg: &str) -> Result<(String, TaskConfig)> {
    let path = Path::new(arg);
    if arg.ends_with(".toml") || path.is_file() {
        let cfg = RunConfig::load(path)?;
        Ok((cfg.task.to_ascii_lowercase(), cfg.task_config()?))
    } else {
        let preset: TaskPreset = arg.parse()?;
        Ok((preset.name().to_string(), TaskConfig::preset(preset)))
    }
}
