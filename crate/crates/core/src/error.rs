use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian (max |H - H^dagger| = {deviation:e})")]
    HermiticityViolation { deviation: f64 },

    #[error("dimension error: {0}")]
    DimensionError(String),

    #[error("unknown gate `{0}`")]
    UnknownGate(String),

    #[error("action has {got} fields, expected {expected}")]
    ActionShapeError { expected: usize, got: usize },

    #[error("action value {value} is not allowed for field {field}")]
    ActionValueError { field: usize, value: f64 },

    #[error("action index {index} out of range for an action space of {total}")]
    ActionIndexError { index: usize, total: usize },

    #[error("protocol has {got} pulses, expected {expected}")]
    ProtocolLengthError { expected: usize, got: usize },

    #[error("empty set: {0}")]
    EmptySetError(&'static str),

    #[error("shape mismatch: {0}")]
    ShapeError(String),

    #[error("empty training batch")]
    EmptyBatchError,

    #[error("fidelity {0} is outside [0, 1]")]
    FidelityRangeError(f64),

    #[error("replay memory is empty")]
    EmptyMemoryError,

    #[error("step {t} outside 1..={horizon}")]
    StepRangeError { t: usize, horizon: usize },

    #[error("state set contains repeated states (pair {0}, {1})")]
    DegenerateStates(usize, usize),

    #[error("state is not normalized (norm^2 = {0})")]
    NormalizationError(f64),

    #[error("invalid configuration: {0}")]
    ConfigError(String),

    #[error("search space of {actions}^{horizon} protocols exceeds {limit}")]
    SearchSpaceError { actions: usize, horizon: usize, limit: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
