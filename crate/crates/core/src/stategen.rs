//! Training and testing state sets.
//!
//! Training states come from repeatedly applying `H . Phase(theta) . H` to
//! `|0>`; testing states from repeatedly evolving under `Z + u X` for a short
//! pulse with a random `u`. Both walks start at `|0>` and keep every
//! successive output.
//!
//! Randomness comes from [`crate::rng::SeedStreams`] (ChaCha8, see that
//! module), so a seed fully determines a set on every platform.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{
    matexp_hermitian, sigma_x, sigma_z, state_fidelity, ComplexMatrix, Gate, StateVector,
};
use crate::rng::{SeedStreams, Stream};

/// Phase angle of the training-state generator, `0.16738 * pi`.
pub const TRAINING_THETA: f64 = 0.16738 * PI;

/// Pulse length of the testing-state walk.
pub const TESTING_DT: f64 = 0.05;

/// Bound of the random control amplitude in the testing-state walk.
pub const TESTING_U_MAX: f64 = 4.0;

/// Two training states count as the same if their overlap exceeds this.
pub const DISTINCT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSetKind {
    Training,
    Testing,
}

/// How the testing walk draws its control amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlDistribution {
    /// Uniform on `[-4, 4]`.
    #[default]
    Continuous,
    /// Uniform on `{-4, 4}`.
    TwoPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSet {
    pub kind: StateSetKind,
    pub seed: u64,
    pub theta: Option<f64>,
    pub dt: Option<f64>,
    pub states: Vec<StateVector>,
}

/// On-disk layout: `{kind, seed, theta, dt, states: [[[re, im], ...], ...]}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateSetFile {
    kind: StateSetKind,
    seed: u64,
    theta: Option<f64>,
    dt: Option<f64>,
    states: Vec<Vec<[f64; 2]>>,
}

impl StateSet {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.states.first().map(StateVector::dim)
    }

    pub fn to_json(&self) -> String {
        let file = StateSetFile {
            kind: self.kind,
            seed: self.seed,
            theta: self.theta,
            dt: self.dt,
            states: self
                .states
                .iter()
                .map(|s| s.amplitudes().iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        };
        serde_json::to_string(&file).expect("state sets always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: StateSetFile = serde_json::from_str(text)
            .map_err(|e| Error::ConfigError(format!("malformed state set: {e}")))?;
        let states = file
            .states
            .into_iter()
            .map(|amps| {
                StateVector::new(amps.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = states.first() {
            if states.iter().any(|s| s.dim() != first.dim()) {
                return Err(Error::DimensionError("mixed state dimensions in set".into()));
            }
        }
        Ok(Self {
            kind: file.kind,
            seed: file.seed,
            theta: file.theta,
            dt: file.dt,
            states,
        })
    }

    /// Index pair of the most-overlapping distinct states, if any pair's
    /// overlap reaches `1 - DISTINCT_TOL`.
    pub fn find_repeat(&self) -> Option<(usize, usize)> {
        for i in 0..self.states.len() {
            for j in (i + 1)..self.states.len() {
                let f = state_fidelity(&self.states[i], &self.states[j]).ok()?;
                if f >= 1.0 - DISTINCT_TOL {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

/// Rounds off drift accumulated by long walks so every state stays within
/// the normalization tolerance.
fn renormalize(amplitudes: Vec<Complex64>) -> Vec<Complex64> {
    let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    amplitudes.into_iter().map(|z| z / norm).collect()
}

fn walk(first: StateVector, count: usize, mut step: impl FnMut(&[Complex64]) -> Vec<Complex64>) -> Vec<StateVector> {
    let mut out = Vec::with_capacity(count);
    let mut current = first.amplitudes().to_vec();
    for _ in 0..count {
        current = renormalize(step(&current));
        out.push(StateVector::new(current.clone()).expect("unitary walk stays normalized"));
    }
    out
}

/// The default training set: `count` successive outputs of
/// `H . Phase(0.16738 pi) . H` applied to `|0>`.
pub fn gen_training_states(count: usize) -> StateSet {
    gen_training_states_with_theta(count, TRAINING_THETA)
        .expect("the default angle never repeats within practical set sizes")
}

/// Training walk with an arbitrary phase angle. Fails if two generated
/// states coincide (e.g. `theta = 0`, which returns `|0>` forever).
pub fn gen_training_states_with_theta(count: usize, theta: f64) -> Result<StateSet> {
    if count == 0 {
        return Err(Error::EmptySetError("training state count"));
    }
    let h = Gate::H.matrix();
    let step = &(&h * &Gate::Phase(theta).matrix()) * &h;
    let set = StateSet {
        kind: StateSetKind::Training,
        seed: 0,
        theta: Some(theta),
        dt: None,
        states: walk(StateVector::basis(2, 0), count, |v| step.apply_raw(v)),
    };
    match set.find_repeat() {
        Some((i, j)) => Err(Error::DegenerateStates(i, j)),
        None => Ok(set),
    }
}

/// The default testing set: a random walk under `Z + u X` with `u` uniform
/// on `[-4, 4]` and pulse length 0.05.
pub fn gen_testing_states(count: usize, seed: u64) -> StateSet {
    gen_testing_states_with(count, seed, ControlDistribution::Continuous)
}

pub fn gen_testing_states_with(count: usize, seed: u64, dist: ControlDistribution) -> StateSet {
    let mut rng = SeedStreams::new(seed).stream(Stream::StateGen);
    let (z, x) = (sigma_z(), sigma_x());
    let states = walk(StateVector::basis(2, 0), count, |v| {
        let u = match dist {
            ControlDistribution::Continuous => rng.gen_range(-TESTING_U_MAX..=TESTING_U_MAX),
            ControlDistribution::TwoPoint => {
                if rng.gen::<bool>() {
                    TESTING_U_MAX
                } else {
                    -TESTING_U_MAX
                }
            }
        };
        testing_step(&z, &x, u).apply_raw(v)
    });
    StateSet {
        kind: StateSetKind::Testing,
        seed,
        theta: None,
        dt: Some(TESTING_DT),
        states,
    }
}

/// One pulse of the testing walk, `exp(-i (Z + u X) dt)`.
pub fn testing_step(z: &ComplexMatrix, x: &ComplexMatrix, u: f64) -> ComplexMatrix {
    let h = z.add(&x.scale(Complex64::new(u, 0.0))).expect("2x2");
    matexp_hermitian(&h, TESTING_DT).expect("Hermitian 2x2")
}

/// Two-qubit product states `|a> (x) |b>` with `a`, `b` drawn independently
/// and uniformly (with replacement) from a single-qubit pool.
pub fn gen_two_qubit_states(pool: &StateSet, count: usize, seed: u64) -> Result<StateSet> {
    gen_two_qubit_states_as(pool, count, seed, StateSetKind::Training)
}

pub fn gen_two_qubit_states_as(
    pool: &StateSet,
    count: usize,
    seed: u64,
    kind: StateSetKind,
) -> Result<StateSet> {
    if pool.is_empty() {
        return Err(Error::EmptySetError("single-qubit pool"));
    }
    if pool.dim() != Some(2) {
        return Err(Error::DimensionError("two-qubit products need a single-qubit pool".into()));
    }
    let mut rng = SeedStreams::new(seed).stream(Stream::StateGen);
    let n = pool.len();
    let states = (0..count)
        .map(|_| {
            let a = &pool.states[rng.gen_range(0..n)];
            let b = &pool.states[rng.gen_range(0..n)];
            a.tensor(b)
        })
        .collect();
    Ok(StateSet {
        kind,
        seed,
        theta: None,
        dt: pool.dt,
        states,
    })
}
