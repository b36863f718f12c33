//! Model-free design and calibration of quantum gates with deep Q-learning.
//!
//! The agent only ever sees an end-of-episode fidelity from a [`BlackBox`]
//! environment. Everything quantum lives in [`qmath`] and [`envs`].

pub mod agent;
pub mod envs;
pub mod error;
pub mod net;
pub mod oracle;
pub mod qmath;
pub mod replay;
pub mod rng;
pub mod stategen;

pub use agent::{
    run_training, run_training_with, AgentVariant, EpisodeRecord, EpsilonState, HyperParams,
    TrainingResult,
};
pub use envs::{
    ActionSpace, BlackBox, Circuit, ControlAction, Environment, FidelityVector, HamiltonianModel,
    TaskConfig, TaskKind, TaskPreset,
};
pub use error::{Error, Result};
pub use net::{Activation, Architecture, Checkpoint, QNetwork};
pub use oracle::{exhaustive_search, OracleResult};
pub use qmath::{ComplexMatrix, Gate, StateVector};
pub use replay::{LogBase, ReplayMemory, Transition};
pub use stategen::{StateSet, StateSetKind};
