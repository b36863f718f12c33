//! A one-hidden-layer Q-network with an optional dueling head.
//!
//! Plain networks compute `Q = W_out act(W_h s + b_h) + b_out`. Dueling
//! networks add a scalar value stream on the same hidden features and return
//! `Q(s, a) = V(s) + A(s, a)` without centring the advantages.
//!
//! Training minimises the mean squared error between the Q-value of the
//! action taken in each sample and its target; the other outputs receive no
//! gradient.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `h`.
    #[inline]
    fn derivative(self, z: f64, h: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - h * h,
        }
    }
}

/// Fully connected layer, `y = W x + b`, with `W` stored row-major as
/// `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    inputs: usize,
    outputs: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and biases.
    fn uniform<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let mut draw = || rng.gen_range(-bound..=bound);
        let weight = (0..inputs * outputs).map(|_| draw()).collect();
        let bias = (0..outputs).map(|_| draw()).collect();
        Self {
            inputs,
            outputs,
            weight,
            bias,
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    #[inline]
    fn row(&self, r: usize) -> &[f64] {
        &self.weight[r * self.inputs..(r + 1) * self.inputs]
    }

    #[inline]
    fn output(&self, r: usize, x: &[f64]) -> f64 {
        self.bias[r] + dot(self.row(r), x)
    }

    fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.outputs).map(|r| self.output(r, x)));
    }

    fn len(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weight.iter().chain(&self.bias)
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weight.iter_mut().chain(self.bias.iter_mut())
    }

    fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    fn to_rows(&self) -> DenseFile {
        DenseFile {
            weight: self.weight.chunks(self.inputs).map(<[f64]>::to_vec).collect(),
            bias: self.bias.clone(),
        }
    }

    fn from_rows(file: DenseFile, inputs: usize, outputs: usize) -> Result<Self> {
        if file.weight.len() != outputs
            || file.weight.iter().any(|r| r.len() != inputs)
            || file.bias.len() != outputs
        {
            return Err(Error::ShapeError(format!(
                "layer weights do not match a {inputs} -> {outputs} layer"
            )));
        }
        Ok(Self {
            inputs,
            outputs,
            weight: file.weight.into_iter().flatten().collect(),
            bias: file.bias,
        })
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub dueling: bool,
    pub activation: Activation,
}

/// One supervised sample: the Q-value of `action` at `state` should move
/// towards `target`.
#[derive(Debug, Clone, Copy)]
pub struct TrainSample<'a> {
    pub state: &'a [f64],
    pub action: usize,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    arch: Architecture,
    hidden: Dense,
    /// Q-values for plain networks, advantages for dueling ones.
    output: Dense,
    value: Option<Dense>,
}

/// Loss and per-parameter gradient, laid out like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub loss: f64,
    hidden: Dense,
    output: Dense,
    value: Option<Dense>,
}

impl GradientReport {
    /// Gradient entries in the order of [`QNetwork::params`].
    pub fn flat(&self) -> Vec<f64> {
        layers(&self.hidden, &self.output, &self.value)
            .flat_map(|l| l.values().copied())
            .collect()
    }

    pub fn norm(&self) -> f64 {
        self.flat().iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Euclidean norm of the value-stream gradient (zero for plain networks).
    pub fn value_head_norm(&self) -> f64 {
        self.value
            .as_ref()
            .map_or(0.0, |v| v.values().map(|g| g * g).sum::<f64>().sqrt())
    }

    /// Euclidean norm of the Q-value / advantage head gradient.
    pub fn output_head_norm(&self) -> f64 {
        self.output.values().map(|g| g * g).sum::<f64>().sqrt()
    }
}

fn layers<'a>(
    hidden: &'a Dense,
    output: &'a Dense,
    value: &'a Option<Dense>,
) -> impl Iterator<Item = &'a Dense> {
    [hidden, output].into_iter().chain(value.as_ref())
}

impl QNetwork {
    pub fn new<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Result<Self> {
        Self::check_arch(&arch)?;
        let hidden = Dense::uniform(arch.input_dim, arch.hidden_dim, rng);
        let output = Dense::uniform(arch.hidden_dim, arch.output_dim, rng);
        let value = arch
            .dueling
            .then(|| Dense::uniform(arch.hidden_dim, 1, rng));
        Ok(Self {
            arch,
            hidden,
            output,
            value,
        })
    }

    /// All weights and biases zero.
    pub fn zeros(arch: Architecture) -> Result<Self> {
        Self::check_arch(&arch)?;
        Ok(Self {
            arch,
            hidden: Dense::zeros(arch.input_dim, arch.hidden_dim),
            output: Dense::zeros(arch.hidden_dim, arch.output_dim),
            value: arch.dueling.then(|| Dense::zeros(arch.hidden_dim, 1)),
        })
    }

    fn check_arch(arch: &Architecture) -> Result<()> {
        if arch.input_dim == 0 || arch.hidden_dim == 0 || arch.output_dim == 0 {
            return Err(Error::ShapeError("network dimensions must be positive".into()));
        }
        Ok(())
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn is_finite(&self) -> bool {
        layers(&self.hidden, &self.output, &self.value).all(Dense::is_finite)
    }

    fn check_input(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.arch.input_dim {
            return Err(Error::ShapeError(format!(
                "state has {} entries, network expects {}",
                state.len(),
                self.arch.input_dim
            )));
        }
        Ok(())
    }

    fn hidden_features(&self, state: &[f64], z: &mut Vec<f64>, h: &mut Vec<f64>) {
        self.hidden.forward_into(state, z);
        h.clear();
        h.extend(z.iter().map(|&v| self.arch.activation.apply(v)));
    }

    /// Q-values for every action.
    pub fn forward(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.check_input(state)?;
        let (mut z, mut h, mut q) = (Vec::new(), Vec::new(), Vec::new());
        self.hidden_features(state, &mut z, &mut h);
        self.output.forward_into(&h, &mut q);
        if let Some(v) = &self.value {
            let vs = v.output(0, &h);
            q.iter_mut().for_each(|x| *x += vs);
        }
        Ok(q)
    }

    /// Parameters flattened layer by layer (hidden, output, value), weights
    /// before biases.
    pub fn params(&self) -> Vec<f64> {
        layers(&self.hidden, &self.output, &self.value)
            .flat_map(|l| l.values().copied())
            .collect()
    }

    pub fn param_count(&self) -> usize {
        layers(&self.hidden, &self.output, &self.value)
            .map(Dense::len)
            .sum()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::ShapeError(format!(
                "{} parameters supplied, network has {}",
                params.len(),
                self.param_count()
            )));
        }
        let slots = [&mut self.hidden, &mut self.output]
            .into_iter()
            .chain(self.value.as_mut())
            .flat_map(Dense::values_mut);
        for (slot, &p) in slots.zip(params) {
            *slot = p;
        }
        Ok(())
    }

    /// Mean squared error over the taken actions' Q-values.
    pub fn loss(&self, batch: &[TrainSample<'_>]) -> Result<f64> {
        self.check_batch(batch)?;
        let mut total = 0.0;
        for s in batch {
            let q = self.forward(s.state)?[s.action];
            total += (q - s.target).powi(2);
        }
        Ok(total / batch.len() as f64)
    }

    fn check_batch(&self, batch: &[TrainSample<'_>]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::EmptyBatchError);
        }
        for s in batch {
            self.check_input(s.state)?;
            if s.action >= self.arch.output_dim {
                return Err(Error::ShapeError(format!(
                    "action {} outside {} outputs",
                    s.action, self.arch.output_dim
                )));
            }
        }
        Ok(())
    }

    /// Backpropagated gradient of [`QNetwork::loss`].
    pub fn analytic_gradient(&self, batch: &[TrainSample<'_>]) -> Result<GradientReport> {
        self.check_batch(batch)?;
        let mut g_hidden = Dense::zeros(self.arch.input_dim, self.arch.hidden_dim);
        let mut g_output = Dense::zeros(self.arch.hidden_dim, self.arch.output_dim);
        let mut g_value = self.value.as_ref().map(|_| Dense::zeros(self.arch.hidden_dim, 1));
        let scale = 2.0 / batch.len() as f64;
        let (mut z, mut h) = (Vec::new(), Vec::new());
        let mut loss = 0.0;
        let n_in = self.arch.input_dim;
        let n_hidden = self.arch.hidden_dim;

        for s in batch {
            self.hidden_features(s.state, &mut z, &mut h);
            let a = s.action;
            let mut q = self.output.output(a, &h);
            if let Some(v) = &self.value {
                q += v.output(0, &h);
            }
            let err = q - s.target;
            loss += err * err;
            let g = scale * err;
            if g == 0.0 {
                continue;
            }

            let out_row = &mut g_output.weight[a * n_hidden..(a + 1) * n_hidden];
            out_row.iter_mut().zip(&h).for_each(|(w, &hj)| *w += g * hj);
            g_output.bias[a] += g;
            if let Some(gv) = g_value.as_mut() {
                gv.weight.iter_mut().zip(&h).for_each(|(w, &hj)| *w += g * hj);
                gv.bias[0] += g;
            }

            let w_out = self.output.row(a);
            let w_val = self.value.as_ref().map(|v| v.row(0));
            for j in 0..n_hidden {
                let mut dh = g * w_out[j];
                if let Some(wv) = w_val {
                    dh += g * wv[j];
                }
                let dz = dh * self.arch.activation.derivative(z[j], h[j]);
                if dz == 0.0 {
                    continue;
                }
                let row = &mut g_hidden.weight[j * n_in..(j + 1) * n_in];
                row.iter_mut().zip(s.state).for_each(|(w, &x)| *w += dz * x);
                g_hidden.bias[j] += dz;
            }
        }
        Ok(GradientReport {
            loss: loss / batch.len() as f64,
            hidden: g_hidden,
            output: g_output,
            value: g_value,
        })
    }

    /// One plain gradient-descent step. Returns the loss before the update.
    pub fn train_step(&mut self, batch: &[TrainSample<'_>], learning_rate: f64) -> Result<f64> {
        GradientDescent::plain(learning_rate).step(self, batch)
    }

    fn apply_update(&mut self, delta: impl IntoIterator<Item = f64>) {
        let slots = [&mut self.hidden, &mut self.output]
            .into_iter()
            .chain(self.value.as_mut())
            .flat_map(Dense::values_mut);
        for (p, d) in slots.zip(delta) {
            *p -= d;
        }
    }

    pub fn to_checkpoint(&self, seed: u64, episode: u64, first_action: Option<usize>) -> Checkpoint {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            architecture: self.arch,
            weights: WeightsFile {
                hidden: self.hidden.to_rows(),
                output: self.output.to_rows(),
                value: self.value.as_ref().map(Dense::to_rows),
            },
            seed,
            episode,
            first_action,
        }
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        if ckpt.format_version != CHECKPOINT_VERSION {
            return Err(Error::ShapeError(format!(
                "unsupported checkpoint version {}",
                ckpt.format_version
            )));
        }
        let arch = ckpt.architecture;
        Self::check_arch(&arch)?;
        let w = ckpt.weights;
        let value = match (arch.dueling, w.value) {
            (true, Some(v)) => Some(Dense::from_rows(v, arch.hidden_dim, 1)?),
            (false, None) => None,
            _ => {
                return Err(Error::ShapeError(
                    "value-stream weights do not match the dueling flag".into(),
                ))
            }
        };
        let net = Self {
            arch,
            hidden: Dense::from_rows(w.hidden, arch.input_dim, arch.hidden_dim)?,
            output: Dense::from_rows(w.output, arch.hidden_dim, arch.output_dim)?,
            value,
        };
        if !net.is_finite() {
            return Err(Error::ShapeError("checkpoint contains non-finite weights".into()));
        }
        Ok(net)
    }
}

/// Overwrites `dst` with a deep copy of `src`'s weights.
pub fn copy_weights(src: &QNetwork, dst: &mut QNetwork) -> Result<()> {
    if src.arch != dst.arch {
        return Err(Error::ShapeError(
            "cannot copy weights between different architectures".into(),
        ));
    }
    dst.clone_from(src);
    Ok(())
}

/// Gradient descent with optional momentum and global-norm clipping. The
/// default configuration is the plain update `theta <- theta - lr * grad`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientDescent {
    pub learning_rate: f64,
    pub momentum: f64,
    pub clip_norm: Option<f64>,
    velocity: Vec<f64>,
}

impl GradientDescent {
    pub fn plain(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            momentum: 0.0,
            clip_norm: None,
            velocity: Vec::new(),
        }
    }

    pub fn with_momentum(mut self, momentum: f64) -> Self {
        self.momentum = momentum;
        self
    }

    pub fn with_clip_norm(mut self, clip: Option<f64>) -> Self {
        self.clip_norm = clip;
        self
    }

    /// Computes the gradient on `batch` and updates `net`. Returns the loss
    /// before the update.
    pub fn step(&mut self, net: &mut QNetwork, batch: &[TrainSample<'_>]) -> Result<f64> {
        let report = net.analytic_gradient(batch)?;
        let mut grad = report.flat();
        if let Some(clip) = self.clip_norm {
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > clip {
                let s = clip / norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
        }
        let lr = self.learning_rate;
        if self.momentum == 0.0 {
            net.apply_update(grad.into_iter().map(|g| lr * g));
        } else {
            if self.velocity.len() != grad.len() {
                self.velocity = vec![0.0; grad.len()];
            }
            for (v, g) in self.velocity.iter_mut().zip(&grad) {
                *v = self.momentum * *v + g;
            }
            net.apply_update(self.velocity.iter().map(|v| lr * v));
        }
        Ok(report.loss)
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DenseFile {
    weight: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsFile {
    hidden: DenseFile,
    output: DenseFile,
    value: Option<DenseFile>,
}

/// Serialized network. `first_action` carries the best episode's opening
/// action so a greedy rollout can be reproduced from the checkpoint alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub architecture: Architecture,
    pub weights: WeightsFile,
    pub seed: u64,
    pub episode: u64,
    #[serde(default)]
    pub first_action: Option<usize>,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoints always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ShapeError(format!("malformed checkpoint: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{SeedStreams, Stream};

    fn arch(input: usize, hidden: usize, output: usize, dueling: bool) -> Architecture {
        Architecture {
            input_dim: input,
            hidden_dim: hidden,
            output_dim: output,
            dueling,
            activation: Activation::Relu,
        }
    }

    fn random_net(a: Architecture, seed: u64) -> QNetwork {
        QNetwork::new(a, &mut SeedStreams::new(seed).stream(Stream::Weights)).unwrap()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = QNetwork::zeros(arch(3, 16, 4, true)).unwrap();
        assert_eq!(net.forward(&[0.3, -0.2, 0.9]).unwrap(), vec![0.0; 4]);
        assert!(matches!(net.forward(&[1.0]), Err(Error::ShapeError(_))));
    }

    #[test]
    fn hand_computed_forward_pass() {
        // 2-4-3 network with hand-set weights.
        let mut net = QNetwork::zeros(arch(2, 4, 3, false)).unwrap();
        #[rustfmt::skip]
        let params = [
            // hidden weights (4x2)
            1.0, 0.0,   0.0, 1.0,   1.0, 1.0,   -1.0, 1.0,
            // hidden bias
            0.0, 0.5, -1.0, 0.0,
            // output weights (3x4)
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 1.0, 0.0,
            0.5, 0.5, 0.5, 0.5,
            // output bias
            0.0, 0.1, -0.2,
        ];
        net.set_params(&params).unwrap();
        // s = (2, -1): z = (2, -0.5, 0, -3) -> h = (2, 0, 0, 0)
        let q = net.forward(&[2.0, -1.0]).unwrap();
        let expected = [2.0, 0.1, 0.8];
        for (a, b) in q.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn dueling_value_shift_keeps_argmax() {
        let mut net = random_net(arch(3, 8, 5, true), 4);
        let s = [0.1, -0.1, 0.5];
        let before = net.forward(&s).unwrap();
        let mut params = net.params();
        let last = params.len() - 1; // value-stream bias
        params[last] += 3.25;
        net.set_params(&params).unwrap();
        let after = net.forward(&s).unwrap();
        let argmax = |q: &[f64]| {
            q.iter()
                .enumerate()
                .fold(0, |best, (i, &v)| if v > q[best] { i } else { best })
        };
        assert_eq!(argmax(&before), argmax(&after));
        for (b, a) in before.iter().zip(&after) {
            assert!((a - b - 3.25).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_error_batch_has_zero_gradient_and_no_update() {
        let mut net = random_net(arch(3, 8, 2, false), 1);
        let s = [0.1, 0.2, 0.3];
        let q = net.forward(&s).unwrap();
        let batch = [TrainSample {
            state: &s,
            action: 1,
            target: q[1],
        }];
        let report = net.analytic_gradient(&batch).unwrap();
        assert_eq!(report.loss, 0.0);
        assert!(report.flat().iter().all(|&g| g == 0.0));
        let before = net.clone();
        assert_eq!(net.train_step(&batch, 0.005).unwrap(), 0.0);
        assert_eq!(net, before);
    }

    #[test]
    fn scalar_network_matches_hand_derived_step() {
        // 1-1-1 net: q = w2 * relu(w1 x + b1) + b2, loss = (q - y)^2.
        let mut net = QNetwork::zeros(arch(1, 1, 1, false)).unwrap();
        let (w1, b1, w2, b2) = (0.5, 0.1, -0.7, 0.2);
        net.set_params(&[w1, b1, w2, b2]).unwrap();
        let (x, y, lr) = (2.0, 1.0, 0.05);
        let z: f64 = w1 * x + b1;
        let h = z.max(0.0);
        let q = w2 * h + b2;
        let dq = 2.0 * (q - y);
        let expected = [
            w1 - lr * dq * w2 * x,
            b1 - lr * dq * w2,
            w2 - lr * dq * h,
            b2 - lr * dq,
        ];
        let loss = net
            .train_step(&[TrainSample { state: &[x], action: 0, target: y }], lr)
            .unwrap();
        assert!((loss - (q - y).powi(2)).abs() < 1e-15);
        for (a, b) in net.params().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn repeated_steps_reduce_loss_on_fixed_batch() {
        let mut net = random_net(arch(3, 32, 2, false), 7);
        let states: Vec<[f64; 3]> = (0..8)
            .map(|i| [i as f64 / 8.0, (i % 3) as f64 / 3.0, 0.1])
            .collect();
        let batch: Vec<_> = states
            .iter()
            .enumerate()
            .map(|(i, s)| TrainSample {
                state: s,
                action: i % 2,
                target: (i as f64).sin(),
            })
            .collect();
        let first = net.loss(&batch).unwrap();
        let mut last = first;
        for _ in 0..1000 {
            last = net.train_step(&batch, 0.05).unwrap();
        }
        assert!(last < 0.5 * first, "{first} -> {last}");
    }

    #[test]
    fn empty_batch_is_rejected() {
        let mut net = random_net(arch(3, 4, 2, false), 0);
        assert!(matches!(net.train_step(&[], 0.1), Err(Error::EmptyBatchError)));
        assert!(matches!(
            net.analytic_gradient(&[TrainSample { state: &[0.0; 3], action: 2, target: 0.0 }]),
            Err(Error::ShapeError(_))
        ));
    }

    #[test]
    fn finite_difference_gradient_check_small_nets() {
        for dueling in [false, true] {
            for activation in [Activation::Relu, Activation::Tanh] {
                let a = Architecture {
                    activation,
                    ..arch(3, 6, 3, dueling)
                };
                let net = random_net(a, 11);
                let states = [[0.1, -0.3, 0.7], [0.05, 0.2, -0.4], [-0.6, 0.0, 0.25]];
                let batch: Vec<_> = states
                    .iter()
                    .enumerate()
                    .map(|(i, s)| TrainSample {
                        state: s,
                        action: i,
                        target: 0.3 * i as f64 - 0.2,
                    })
                    .collect();
                let analytic = net.analytic_gradient(&batch).unwrap().flat();
                let base = net.params();
                let h = 1e-6;
                for (k, g) in analytic.iter().enumerate() {
                    let mut plus = net.clone();
                    let mut p = base.clone();
                    p[k] += h;
                    plus.set_params(&p).unwrap();
                    let mut minus = net.clone();
                    p[k] -= 2.0 * h;
                    minus.set_params(&p).unwrap();
                    let fd = (plus.loss(&batch).unwrap() - minus.loss(&batch).unwrap()) / (2.0 * h);
                    let denom = g.abs().max(fd.abs()).max(1e-7);
                    assert!((g - fd).abs() / denom < 1e-5, "param {k}: {g} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn dueling_gradient_reaches_both_heads() {
        let net = random_net(arch(3, 8, 2, true), 3);
        let s = [0.2, 0.4, -0.1];
        let report = net
            .analytic_gradient(&[TrainSample { state: &s, action: 0, target: 10.0 }])
            .unwrap();
        assert!(report.value_head_norm() > 0.0);
        assert!(report.output_head_norm() > 0.0);
    }

    #[test]
    fn copy_weights_is_deep() {
        let src0 = random_net(arch(3, 8, 2, true), 1);
        let mut src = src0.clone();
        let mut dst = random_net(arch(3, 8, 2, true), 2);
        copy_weights(&src, &mut dst).unwrap();
        assert_eq!(dst, src);
        copy_weights(&src, &mut dst).unwrap();
        assert_eq!(dst, src);
        let s = [0.1, 0.1, 0.1];
        src.train_step(&[TrainSample { state: &s, action: 1, target: 5.0 }], 0.1)
            .unwrap();
        assert_eq!(dst.forward(&s).unwrap(), src0.forward(&s).unwrap());
        assert_ne!(dst.forward(&s).unwrap(), src.forward(&s).unwrap());
        let mut other = random_net(arch(3, 8, 2, false), 2);
        assert!(copy_weights(&src, &mut other).is_err());
    }

    #[test]
    fn same_seed_same_initial_weights() {
        let a = random_net(arch(5, 16, 16, true), 99);
        let b = random_net(arch(5, 16, 16, true), 99);
        assert_eq!(a, b);
        let bound = 1.0 / 5f64.sqrt();
        assert!(a.hidden.values().all(|w| w.abs() <= bound));
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        for dueling in [false, true] {
            let net = random_net(arch(3, 32, 2, dueling), 5);
            let text = net.to_checkpoint(5, 120, Some(1)).to_json();
            let ckpt = Checkpoint::from_json(&text).unwrap();
            assert_eq!(ckpt.first_action, Some(1));
            let back = QNetwork::from_checkpoint(ckpt).unwrap();
            assert_eq!(back, net);
            assert_eq!(back.to_checkpoint(5, 120, Some(1)).to_json(), text);
        }
    }

    #[test]
    fn momentum_and_clipping_are_opt_in() {
        let net0 = random_net(arch(3, 8, 2, false), 8);
        let s = [0.3, 0.3, 0.3];
        let batch = [TrainSample { state: &s, action: 0, target: 3.0 }];
        let mut a = net0.clone();
        let mut b = net0.clone();
        a.train_step(&batch, 0.01).unwrap();
        GradientDescent::plain(0.01).step(&mut b, &batch).unwrap();
        assert_eq!(a, b);

        let mut clipped = net0.clone();
        let g = net0.analytic_gradient(&batch).unwrap().norm();
        GradientDescent::plain(1.0)
            .with_clip_norm(Some(1e-3))
            .step(&mut clipped, &batch)
            .unwrap();
        let moved: f64 = clipped
            .params()
            .iter()
            .zip(net0.params())
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(g > 1e-3);
        assert!((moved - 1e-3).abs() < 1e-12);

        let mut m = net0.clone();
        let mut opt = GradientDescent::plain(0.01).with_momentum(0.9);
        opt.step(&mut m, &batch).unwrap();
        opt.step(&mut m, &batch).unwrap();
        assert!(m.is_finite());
    }
}
