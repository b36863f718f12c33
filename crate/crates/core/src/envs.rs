//! Black-box quantum environments.
//!
//! An [`Environment`] takes a complete pulse protocol (a sequence of action
//! indices) and reports a single end-of-episode fidelity. Nothing about the
//! evolution in between is visible through [`BlackBox`], which is the only
//! interface the agent sees. The free `evaluate_*` functions and
//! [`Environment::inspect_unitary`] expose the underlying operators for tests
//! and diagnostics.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{
    circuit_operator, gate_fidelity, inner_raw, matexp_hermitian, sigma_x, sigma_y, sigma_z,
    tensor, trace_overlap, ComplexMatrix, Gate, StateVector,
};

/// Amplitudes available to every control field in the shipped tasks.
pub const BANG_BANG: [f64; 2] = [-4.0, 4.0];

/// One piecewise-constant pulse: the value of every control field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlAction(pub Vec<f64>);

impl ControlAction {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Finite action set: the Cartesian product of per-field allowed values.
///
/// Indices enumerate the product lexicographically, first field most
/// significant, each field's values in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    fields: Vec<Vec<f64>>,
}

impl ActionSpace {
    pub fn new(fields: Vec<Vec<f64>>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::EmptySetError("action space fields"));
        }
        let mut sorted = Vec::with_capacity(fields.len());
        for mut values in fields {
            if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                return Err(Error::ConfigError(
                    "every control field needs at least one finite value".into(),
                ));
            }
            values.sort_by(f64::total_cmp);
            values.dedup();
            sorted.push(values);
        }
        Ok(Self { fields: sorted })
    }

    /// `count` fields each restricted to `values`.
    pub fn uniform(count: usize, values: &[f64]) -> Result<Self> {
        Self::new(vec![values.to_vec(); count])
    }

    pub fn field_count(&self) -> usize {
        self.fields.len()
    }

    pub fn allowed(&self, field: usize) -> &[f64] {
        &self.fields[field]
    }

    pub fn total_actions(&self) -> usize {
        self.fields.iter().map(Vec::len).product()
    }

    pub fn action(&self, index: usize) -> Result<ControlAction> {
        let total = self.total_actions();
        if index >= total {
            return Err(Error::ActionIndexError { index, total });
        }
        let mut rem = index;
        let mut values = vec![0.0; self.fields.len()];
        for (slot, allowed) in values.iter_mut().zip(&self.fields).rev() {
            *slot = allowed[rem % allowed.len()];
            rem /= allowed.len();
        }
        Ok(ControlAction(values))
    }

    pub fn index_of(&self, action: &ControlAction) -> Result<usize> {
        self.check(action)?;
        let mut index = 0;
        for (field, (allowed, &v)) in self.fields.iter().zip(&action.0).enumerate() {
            let pos = allowed
                .iter()
                .position(|&a| a == v)
                .ok_or(Error::ActionValueError { field, value: v })?;
            index = index * allowed.len() + pos;
        }
        Ok(index)
    }

    /// Validates field count and membership of every component.
    pub fn check(&self, action: &ControlAction) -> Result<()> {
        if action.0.len() != self.fields.len() {
            return Err(Error::ActionShapeError {
                expected: self.fields.len(),
                got: action.0.len(),
            });
        }
        for (field, (allowed, &v)) in self.fields.iter().zip(&action.0).enumerate() {
            if !allowed.contains(&v) {
                return Err(Error::ActionValueError { field, value: v });
            }
        }
        Ok(())
    }
}

/// `u0 * Z + u1 * X`. With `fix_u0` the first field is overridden by the
/// constant and only `u1` is controlled.
pub fn build_single_qubit_hamiltonian(
    action: &ControlAction,
    fix_u0: Option<f64>,
) -> Result<ComplexMatrix> {
    let [u0, u1] = action.0[..] else {
        return Err(Error::ActionShapeError {
            expected: 2,
            got: action.0.len(),
        });
    };
    let u0 = fix_u0.unwrap_or(u0);
    sigma_z()
        .scale(Complex64::new(u0, 0.0))
        .add(&sigma_x().scale(Complex64::new(u1, 0.0)))
}

/// `ZZ + u0 X1 + u1 X2 + u2 Y1 + u3 Y2` with `X1 = X (x) I`, `X2 = I (x) X`.
pub fn build_two_qubit_hamiltonian(action: &ControlAction) -> Result<ComplexMatrix> {
    let [u0, u1, u2, u3] = action.0[..] else {
        return Err(Error::ActionShapeError {
            expected: 4,
            got: action.0.len(),
        });
    };
    let id = ComplexMatrix::identity(2);
    let terms = [
        (u0, tensor(&sigma_x(), &id)),
        (u1, tensor(&id, &sigma_x())),
        (u2, tensor(&sigma_y(), &id)),
        (u3, tensor(&id, &sigma_y())),
    ];
    let mut h = tensor(&sigma_z(), &sigma_z());
    for (u, op) in terms {
        h = h.add(&op.scale(Complex64::new(u, 0.0)))?;
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HamiltonianModel {
    SingleQubit { fix_u0: Option<f64> },
    TwoQubit,
}

impl HamiltonianModel {
    pub fn qubits(self) -> u32 {
        match self {
            HamiltonianModel::SingleQubit { .. } => 1,
            HamiltonianModel::TwoQubit => 2,
        }
    }

    pub fn field_count(self) -> usize {
        match self {
            HamiltonianModel::SingleQubit { .. } => 2,
            HamiltonianModel::TwoQubit => 4,
        }
    }

    pub fn hamiltonian(self, action: &ControlAction) -> Result<ComplexMatrix> {
        match self {
            HamiltonianModel::SingleQubit { fix_u0 } => {
                build_single_qubit_hamiltonian(action, fix_u0)
            }
            HamiltonianModel::TwoQubit => build_two_qubit_hamiltonian(action),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Circuit {
    /// `H - Z - H` with both Hadamard slots replaced by the calibrated gate.
    BitFlip,
    /// `(H (x) I)` followed by the calibrated two-qubit gate in place of CNOT.
    Bell,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskKind {
    /// Fidelity of the final unitary against a target gate.
    GateDesign { target: ComplexMatrix },
    /// Worst-case state fidelity of the calibrated gate against a composed
    /// target over a training set.
    ComposedGateCalibration { target: ComplexMatrix },
    /// Worst-case state fidelity of a fixed circuit containing the calibrated
    /// gate against the ideal circuit.
    CircuitCalibration { circuit: Circuit },
}

impl TaskKind {
    pub fn uses_states(&self) -> bool {
        !matches!(self, TaskKind::GateDesign { .. })
    }

    /// The operator the circuit actually applies when the calibrated slot
    /// holds `u_cal`.
    pub fn actual_operator(&self, u_cal: &ComplexMatrix) -> ComplexMatrix {
        match self {
            TaskKind::GateDesign { .. } | TaskKind::ComposedGateCalibration { .. } => {
                u_cal.clone()
            }
            TaskKind::CircuitCalibration {
                circuit: Circuit::BitFlip,
            } => &(u_cal * &Gate::Z.matrix()) * u_cal,
            TaskKind::CircuitCalibration {
                circuit: Circuit::Bell,
            } => u_cal * &tensor(&Gate::H.matrix(), &ComplexMatrix::identity(2)),
        }
    }

    /// The ideal operator the actual circuit is compared against.
    pub fn target_operator(&self) -> ComplexMatrix {
        match self {
            TaskKind::GateDesign { target } | TaskKind::ComposedGateCalibration { target } => {
                target.clone()
            }
            TaskKind::CircuitCalibration {
                circuit: Circuit::BitFlip,
            } => circuit_operator(&[Gate::H, Gate::Z, Gate::H]).expect("nonempty"),
            TaskKind::CircuitCalibration {
                circuit: Circuit::Bell,
            } => &Gate::Cnot.matrix() * &tensor(&Gate::H.matrix(), &ComplexMatrix::identity(2)),
        }
    }
}

/// Named scenarios with their default control settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskPreset {
    Hadamard,
    Cnot,
    Tx,
    Ty,
    Bitflip,
    Bell,
}

impl TaskPreset {
    pub const ALL: [TaskPreset; 6] = [
        TaskPreset::Hadamard,
        TaskPreset::Cnot,
        TaskPreset::Tx,
        TaskPreset::Ty,
        TaskPreset::Bitflip,
        TaskPreset::Bell,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskPreset::Hadamard => "hadamard",
            TaskPreset::Cnot => "cnot",
            TaskPreset::Tx => "tx",
            TaskPreset::Ty => "ty",
            TaskPreset::Bitflip => "bitflip",
            TaskPreset::Bell => "bell",
        }
    }
}

impl fmt::Display for TaskPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskPreset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::ConfigError(format!("unknown task `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskConfig {
    pub kind: TaskKind,
    pub model: HamiltonianModel,
    pub actions: ActionSpace,
    /// Number of pulses `N`.
    pub horizon: usize,
    /// Total evolution time `T` (dimensionless).
    pub total_time: f64,
}

impl TaskConfig {
    /// Single-qubit bang-bang control with `u0` pinned to 1, 28 pulses over
    /// `T = 1`. Shared by the Hadamard, Tx, Ty and bit-flip scenarios.
    fn single_qubit_defaults(kind: TaskKind) -> Self {
        Self {
            kind,
            model: HamiltonianModel::SingleQubit { fix_u0: Some(1.0) },
            actions: ActionSpace::new(vec![vec![1.0], BANG_BANG.to_vec()]).expect("valid"),
            horizon: 28,
            total_time: 1.0,
        }
    }

    /// Two-qubit control, four bang-bang fields, 38 pulses over `T = 1.1`.
    fn two_qubit_defaults(kind: TaskKind) -> Self {
        Self {
            kind,
            model: HamiltonianModel::TwoQubit,
            actions: ActionSpace::uniform(4, &BANG_BANG).expect("valid"),
            horizon: 38,
            total_time: 1.1,
        }
    }

    pub fn preset(preset: TaskPreset) -> Self {
        match preset {
            TaskPreset::Hadamard => Self::single_qubit_defaults(TaskKind::GateDesign {
                target: Gate::H.matrix(),
            }),
            TaskPreset::Cnot => Self::two_qubit_defaults(TaskKind::GateDesign {
                target: Gate::Cnot.matrix(),
            }),
            TaskPreset::Tx => Self::single_qubit_defaults(TaskKind::ComposedGateCalibration {
                target: circuit_operator(&[Gate::H, Gate::T, Gate::H]).expect("nonempty"),
            }),
            TaskPreset::Ty => Self::single_qubit_defaults(TaskKind::ComposedGateCalibration {
                target: circuit_operator(&[Gate::SDagger, Gate::H, Gate::T, Gate::H, Gate::S])
                    .expect("nonempty"),
            }),
            TaskPreset::Bitflip => Self::single_qubit_defaults(TaskKind::CircuitCalibration {
                circuit: Circuit::BitFlip,
            }),
            TaskPreset::Bell => Self::two_qubit_defaults(TaskKind::CircuitCalibration {
                circuit: Circuit::Bell,
            }),
        }
    }

    pub fn qubits(&self) -> u32 {
        self.model.qubits()
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits()
    }

    /// Pulse duration `T / N`.
    pub fn dt(&self) -> f64 {
        self.total_time / self.horizon as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::ConfigError("horizon must be at least 1".into()));
        }
        if !(self.total_time.is_finite() && self.total_time > 0.0) {
            return Err(Error::ConfigError("total time must be positive".into()));
        }
        if self.actions.field_count() != self.model.field_count() {
            return Err(Error::ConfigError(format!(
                "action space has {} fields but the Hamiltonian takes {}",
                self.actions.field_count(),
                self.model.field_count()
            )));
        }
        let dim = self.dim();
        let target = self.kind.target_operator();
        if target.rows() != dim || target.cols() != dim {
            return Err(Error::ConfigError(format!(
                "target is {}x{} but the system has dimension {dim}",
                target.rows(),
                target.cols()
            )));
        }
        if let TaskKind::CircuitCalibration { circuit } = self.kind {
            let needed = match circuit {
                Circuit::BitFlip => 1,
                Circuit::Bell => 2,
            };
            if self.qubits() != needed {
                return Err(Error::ConfigError(format!(
                    "{circuit:?} circuit needs {needed} qubit(s)"
                )));
            }
        }
        Ok(())
    }

    fn check_protocol_len(&self, len: usize) -> Result<()> {
        if len != self.horizon {
            return Err(Error::ProtocolLengthError {
                expected: self.horizon,
                got: len,
            });
        }
        Ok(())
    }

    /// `U_f = U(A_N) ... U(A_1) U_0` with `U_0 = I`, computed from scratch.
    fn final_unitary(&self, protocol: &[ControlAction]) -> Result<ComplexMatrix> {
        self.check_protocol_len(protocol.len())?;
        let dt = self.dt();
        let mut u = ComplexMatrix::identity(self.dim());
        for action in protocol {
            self.actions.check(action)?;
            let step = matexp_hermitian(&self.model.hamiltonian(action)?, dt)?;
            u = step.matmul(&u)?;
        }
        Ok(u)
    }
}

/// Per-state fidelities of a calibration episode.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityVector(pub Vec<f64>);

impl FidelityVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Worst-case entry of a fidelity vector.
pub fn min_fidelity(fv: &FidelityVector) -> Result<f64> {
    fv.0
        .iter()
        .copied()
        .reduce(f64::min)
        .ok_or(Error::EmptySetError("fidelity vector"))
}

/// Gate-design evaluation: returns the final unitary and its gate fidelity.
pub fn evaluate_gate_design(
    protocol: &[ControlAction],
    cfg: &TaskConfig,
) -> Result<(ComplexMatrix, f64)> {
    let uf = cfg.final_unitary(protocol)?;
    let f = gate_fidelity(&uf, &cfg.kind.target_operator(), cfg.qubits())?;
    Ok((uf, f))
}

fn evaluate_on_states(
    protocol: &[ControlAction],
    cfg: &TaskConfig,
    states: &[StateVector],
) -> Result<FidelityVector> {
    if states.is_empty() {
        return Err(Error::EmptySetError("training states"));
    }
    let uf = cfg.final_unitary(protocol)?;
    let actual = cfg.kind.actual_operator(&uf);
    let target = cfg.kind.target_operator();
    states
        .iter()
        .map(|psi0| {
            let psi_f = actual.apply(psi0)?;
            let psi_t = target.apply(psi0)?;
            Ok(psi_t.inner(&psi_f)?.norm_sqr())
        })
        .collect::<Result<Vec<_>>>()
        .map(FidelityVector)
}

/// Composed single-qubit gate calibration: `F_j = |<U_T psi_j | U_f psi_j>|^2`.
pub fn evaluate_composed_gate(
    protocol: &[ControlAction],
    cfg: &TaskConfig,
    states: &[StateVector],
) -> Result<FidelityVector> {
    if !matches!(cfg.kind, TaskKind::ComposedGateCalibration { .. }) || cfg.qubits() != 1 {
        return Err(Error::ConfigError(
            "composed-gate evaluation needs a single-qubit composed-gate task".into(),
        ));
    }
    evaluate_on_states(protocol, cfg, states)
}

/// In-circuit calibration: per-state fidelity of the circuit outputs.
pub fn evaluate_circuit_calibration(
    protocol: &[ControlAction],
    cfg: &TaskConfig,
    states: &[StateVector],
) -> Result<FidelityVector> {
    if !matches!(cfg.kind, TaskKind::CircuitCalibration { .. }) {
        return Err(Error::ConfigError(
            "circuit evaluation needs a circuit-calibration task".into(),
        ));
    }
    evaluate_on_states(protocol, cfg, states)
}

/// The agent-facing contract: a complete protocol in, one number out.
pub trait BlackBox {
    fn action_space(&self) -> &ActionSpace;

    fn horizon(&self) -> usize;

    /// Gate fidelity for design tasks, worst-case state fidelity for
    /// calibration tasks.
    fn evaluate(&self, protocol: &[usize]) -> Result<f64>;
}

/// A task with its propagators cached per action and its training states
/// and their ideal outputs precomputed.
#[derive(Debug, Clone)]
pub struct Environment {
    cfg: TaskConfig,
    propagators: Vec<ComplexMatrix>,
    target: ComplexMatrix,
    inputs: Vec<StateVector>,
    ideal_outputs: Vec<Vec<Complex64>>,
}

impl Environment {
    pub fn new(cfg: TaskConfig, states: Option<Vec<StateVector>>) -> Result<Self> {
        cfg.validate()?;
        let dt = cfg.dt();
        let propagators = (0..cfg.actions.total_actions())
            .map(|i| {
                let a = cfg.actions.action(i)?;
                matexp_hermitian(&cfg.model.hamiltonian(&a)?, dt)
            })
            .collect::<Result<Vec<_>>>()?;
        let target = cfg.kind.target_operator();
        let inputs = if cfg.kind.uses_states() {
            let states = states.ok_or(Error::EmptySetError("training states"))?;
            if states.is_empty() {
                return Err(Error::EmptySetError("training states"));
            }
            if let Some(bad) = states.iter().find(|s| s.dim() != cfg.dim()) {
                return Err(Error::DimensionError(format!(
                    "{}-dimensional training state for a {}-dimensional task",
                    bad.dim(),
                    cfg.dim()
                )));
            }
            states
        } else {
            Vec::new()
        };
        let ideal_outputs = inputs
            .iter()
            .map(|s| target.apply_raw(s.amplitudes()))
            .collect();
        Ok(Self {
            cfg,
            propagators,
            target,
            inputs,
            ideal_outputs,
        })
    }

    pub fn config(&self) -> &TaskConfig {
        &self.cfg
    }

    pub fn training_states(&self) -> &[StateVector] {
        &self.inputs
    }

    fn unitary_of(&self, protocol: &[usize]) -> Result<ComplexMatrix> {
        self.cfg.check_protocol_len(protocol.len())?;
        let n = self.cfg.dim();
        let mut u = ComplexMatrix::identity(n);
        let mut scratch = ComplexMatrix::zeros(n, n);
        let total = self.propagators.len();
        for &a in protocol {
            let p = self
                .propagators
                .get(a)
                .ok_or(Error::ActionIndexError { index: a, total })?;
            p.matmul_into(&u, &mut scratch);
            std::mem::swap(&mut u, &mut scratch);
        }
        Ok(u)
    }

    /// Final unitary of a protocol. Diagnostic access only; the training
    /// loop never calls this.
    pub fn inspect_unitary(&self, protocol: &[usize]) -> Result<ComplexMatrix> {
        self.unitary_of(protocol)
    }

    /// Per-state fidelities of a protocol on an arbitrary state set.
    pub fn fidelities_on(&self, protocol: &[usize], states: &[StateVector]) -> Result<FidelityVector> {
        let actual = self.cfg.kind.actual_operator(&self.unitary_of(protocol)?);
        states
            .iter()
            .map(|s| {
                let out = actual.apply(s)?;
                let ideal = self.target.apply(s)?;
                Ok(ideal.inner(&out)?.norm_sqr())
            })
            .collect::<Result<Vec<_>>>()
            .map(FidelityVector)
    }

    /// Per-state fidelities on the training set.
    pub fn training_fidelities(&self, protocol: &[usize]) -> Result<FidelityVector> {
        let actual = self.cfg.kind.actual_operator(&self.unitary_of(protocol)?);
        Ok(FidelityVector(
            self.inputs
                .iter()
                .zip(&self.ideal_outputs)
                .map(|(s, ideal)| inner_raw(ideal, &actual.apply_raw(s.amplitudes())).norm_sqr())
                .collect(),
        ))
    }
}

impl BlackBox for Environment {
    fn action_space(&self) -> &ActionSpace {
        &self.cfg.actions
    }

    fn horizon(&self) -> usize {
        self.cfg.horizon
    }

    fn evaluate(&self, protocol: &[usize]) -> Result<f64> {
        match &self.cfg.kind {
            TaskKind::GateDesign { .. } => Ok(trace_overlap(&self.unitary_of(protocol)?, &self.target)),
            _ => min_fidelity(&self.training_fidelities(protocol)?),
        }
    }
}
