//! One-hidden-layer tanh networks with a single linear output.
//!
//! A network with `n_hidden` hidden nodes over `n_inputs` features computes
//!
//! ```text
//! f(x) = b2 + sum_i w_i * tanh(b1_i + row_i . x)
//! ```
//!
//! Parameters are stored in one flat buffer with a fixed ordering that is
//! also the serialization and gradient-layout contract: the first layer
//! row-major (`n_hidden` rows of `n_inputs` entries), then `bias1`, then
//! `output_weights`, then `bias2`. Column `k` of the first layer collects
//! every weight attached to input feature `k`; the group penalties act on
//! those columns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Task a dataset's targets belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Binary,
}

/// Loss minimized during training.
///
/// `BinaryCrossEntropy` applies a sigmoid to the network output and is only
/// valid for binary tasks; `Squared` is valid for either.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Squared,
    BinaryCrossEntropy,
}

#[derive(Serialize, Deserialize)]
struct RawNetworkParams {
    n_hidden: usize,
    n_inputs: usize,
    first_layer: Vec<f64>,
    bias1: Vec<f64>,
    output_weights: Vec<f64>,
    bias2: f64,
}

/// All weights of a `(n_inputs, n_hidden, 1)` tanh network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetworkParams", into = "RawNetworkParams")]
pub struct NetworkParams {
    n_hidden: usize,
    n_inputs: usize,
    theta: Vec<f64>,
}

impl NetworkParams {
    /// Builds a network from its pieces. `first_layer` is row-major with
    /// `n_hidden * n_inputs` entries.
    pub fn new(
        n_inputs: usize,
        first_layer: Vec<f64>,
        bias1: Vec<f64>,
        output_weights: Vec<f64>,
        bias2: f64,
    ) -> Result<Self> {
        let n_hidden = bias1.len();
        if n_hidden == 0 || n_inputs == 0 {
            return Err(Error::Config(
                "network needs at least one hidden node and one input".into(),
            ));
        }
        if first_layer.len() != n_hidden * n_inputs {
            return Err(Error::DimensionMismatch(format!(
                "first_layer has {} entries, expected {} ({} x {})",
                first_layer.len(),
                n_hidden * n_inputs,
                n_hidden,
                n_inputs
            )));
        }
        if output_weights.len() != n_hidden {
            return Err(Error::DimensionMismatch(format!(
                "output_weights has {} entries, expected {}",
                output_weights.len(),
                n_hidden
            )));
        }
        let mut theta = first_layer;
        theta.extend_from_slice(&bias1);
        theta.extend_from_slice(&output_weights);
        theta.push(bias2);
        let params = NetworkParams { n_hidden, n_inputs, theta };
        params.check_finite()?;
        Ok(params)
    }

    /// Builds a network from first-layer rows (one per hidden node).
    pub fn from_rows(
        rows: &[Vec<f64>],
        bias1: &[f64],
        output_weights: &[f64],
        bias2: f64,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Config("network needs at least one hidden node".into()));
        }
        let n_inputs = rows[0].len();
        let mut first_layer = Vec::with_capacity(rows.len() * n_inputs);
        for row in rows {
            if row.len() != n_inputs {
                return Err(Error::DimensionMismatch("ragged first-layer rows".into()));
            }
            first_layer.extend_from_slice(row);
        }
        Self::new(n_inputs, first_layer, bias1.to_vec(), output_weights.to_vec(), bias2)
    }

    /// The all-zero network of the given architecture.
    pub fn zeros(n_hidden: usize, n_inputs: usize) -> Result<Self> {
        if n_hidden == 0 || n_inputs == 0 {
            return Err(Error::Config(
                "network needs at least one hidden node and one input".into(),
            ));
        }
        Ok(NetworkParams {
            n_hidden,
            n_inputs,
            theta: vec![0.0; flat_len(n_hidden, n_inputs)],
        })
    }

    /// Rebuilds a network from a flat parameter vector in the documented
    /// order (first layer row-major, bias1, output_weights, bias2).
    pub fn from_flat(n_hidden: usize, n_inputs: usize, theta: &[f64]) -> Result<Self> {
        if n_hidden == 0 || n_inputs == 0 {
            return Err(Error::Config(
                "network needs at least one hidden node and one input".into(),
            ));
        }
        if theta.len() != flat_len(n_hidden, n_inputs) {
            return Err(Error::DimensionMismatch(format!(
                "flat vector has {} entries, expected {}",
                theta.len(),
                flat_len(n_hidden, n_inputs)
            )));
        }
        let params = NetworkParams { n_hidden, n_inputs, theta: theta.to_vec() };
        params.check_finite()?;
        Ok(params)
    }

    fn check_finite(&self) -> Result<()> {
        if self.theta.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Contract("network parameters must be finite".into()))
        }
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    /// Flat first layer, row-major.
    pub fn first_layer(&self) -> &[f64] {
        &self.theta[..self.n_hidden * self.n_inputs]
    }

    /// First-layer row of hidden node `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.theta[i * self.n_inputs..(i + 1) * self.n_inputs]
    }

    /// First-layer weight from input `k` into hidden node `i`.
    pub fn weight(&self, i: usize, k: usize) -> f64 {
        self.theta[i * self.n_inputs + k]
    }

    pub fn bias1(&self) -> &[f64] {
        let o = self.n_hidden * self.n_inputs;
        &self.theta[o..o + self.n_hidden]
    }

    pub fn output_weights(&self) -> &[f64] {
        let o = self.n_hidden * (self.n_inputs + 1);
        &self.theta[o..o + self.n_hidden]
    }

    pub fn bias2(&self) -> f64 {
        self.theta[self.theta.len() - 1]
    }

    /// Euclidean norm of first-layer column `k` (the group for feature `k`).
    pub fn column_norm(&self, k: usize) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n_hidden {
            let w = self.theta[i * self.n_inputs + k];
            s += w * w;
        }
        s.sqrt()
    }

    /// Copies the parameters into a flat vector in the documented order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.theta.clone()
    }

    /// Number of entries in the flat parameter vector.
    pub fn flat_len(&self) -> usize {
        self.theta.len()
    }

    pub(crate) fn flat(&self) -> &[f64] {
        &self.theta
    }

    pub(crate) fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }
}

pub(crate) fn flat_len(n_hidden: usize, n_inputs: usize) -> usize {
    n_hidden * (n_inputs + 2) + 1
}

impl TryFrom<RawNetworkParams> for NetworkParams {
    type Error = Error;

    fn try_from(raw: RawNetworkParams) -> Result<Self> {
        if raw.bias1.len() != raw.n_hidden {
            return Err(Error::DimensionMismatch(format!(
                "bias1 has {} entries, expected {}",
                raw.bias1.len(),
                raw.n_hidden
            )));
        }
        NetworkParams::new(raw.n_inputs, raw.first_layer, raw.bias1, raw.output_weights, raw.bias2)
    }
}

impl From<NetworkParams> for RawNetworkParams {
    fn from(p: NetworkParams) -> Self {
        RawNetworkParams {
            n_hidden: p.n_hidden,
            n_inputs: p.n_inputs,
            first_layer: p.first_layer().to_vec(),
            bias1: p.bias1().to_vec(),
            output_weights: p.output_weights().to_vec(),
            bias2: p.bias2(),
        }
    }
}

/// A supervised dataset with rows stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<f64>,
    targets: Vec<f64>,
    n_inputs: usize,
    task: Task,
}

impl Dataset {
    /// Builds a dataset from sample rows. Targets for a binary task must be
    /// exactly 0 or 1.
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>, task: Task) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::Config("dataset must contain at least one sample".into()));
        }
        let n_inputs = inputs[0].len();
        let mut flat = Vec::with_capacity(inputs.len() * n_inputs);
        for row in &inputs {
            if row.len() != n_inputs {
                return Err(Error::DimensionMismatch("ragged input rows".into()));
            }
            flat.extend_from_slice(row);
        }
        Self::from_flat(flat, n_inputs, targets, task)
    }

    /// Builds a dataset from a row-major input buffer.
    pub fn from_flat(inputs: Vec<f64>, n_inputs: usize, targets: Vec<f64>, task: Task) -> Result<Self> {
        if n_inputs == 0 {
            return Err(Error::Config("dataset needs at least one feature".into()));
        }
        if inputs.len() != targets.len() * n_inputs {
            return Err(Error::DimensionMismatch(format!(
                "{} input entries for {} targets with {} features",
                inputs.len(),
                targets.len(),
                n_inputs
            )));
        }
        if targets.is_empty() {
            return Err(Error::Config("dataset must contain at least one sample".into()));
        }
        if !inputs.iter().all(|v| v.is_finite()) || !targets.iter().all(|v| v.is_finite()) {
            return Err(Error::Contract("dataset entries must be finite".into()));
        }
        if task == Task::Binary && !targets.iter().all(|&y| y == 0.0 || y == 1.0) {
            return Err(Error::Contract("binary targets must be exactly 0 or 1".into()));
        }
        Ok(Dataset { inputs, targets, n_inputs, task })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.n_inputs..(i + 1) * self.n_inputs]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// New dataset holding the given rows (in the given order).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Config("subset must contain at least one sample".into()));
        }
        let mut inputs = Vec::with_capacity(indices.len() * self.n_inputs);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Contract(format!(
                    "subset index {} out of range for {} samples",
                    i,
                    self.len()
                )));
            }
            inputs.extend_from_slice(self.row(i));
            targets.push(self.targets[i]);
        }
        Ok(Dataset { inputs, targets, n_inputs: self.n_inputs, task: self.task })
    }

    /// New dataset keeping only the features where `mask` is true.
    pub fn select_columns(&self, mask: &[bool]) -> Result<Self> {
        if mask.len() != self.n_inputs {
            return Err(Error::DimensionMismatch(format!(
                "mask has {} entries for {} features",
                mask.len(),
                self.n_inputs
            )));
        }
        let kept: Vec<usize> =
            (0..self.n_inputs).filter(|&k| mask[k]).collect();
        if kept.is_empty() {
            return Err(Error::Config("column mask keeps no features".into()));
        }
        let mut inputs = Vec::with_capacity(self.len() * kept.len());
        for i in 0..self.len() {
            let row = self.row(i);
            for &k in &kept {
                inputs.push(row[k]);
            }
        }
        Ok(Dataset {
            inputs,
            targets: self.targets.clone(),
            n_inputs: kept.len(),
            task: self.task,
        })
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(z)) without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn check_compat(params: &NetworkParams, data: &Dataset, loss: LossKind) -> Result<()> {
    if params.n_inputs != data.n_inputs {
        return Err(Error::DimensionMismatch(format!(
            "network expects {} inputs, dataset has {}",
            params.n_inputs, data.n_inputs
        )));
    }
    if loss == LossKind::BinaryCrossEntropy && data.task != Task::Binary {
        return Err(Error::Contract(
            "binary cross-entropy requires a binary task".into(),
        ));
    }
    Ok(())
}

/// Network output for a single input row.
pub fn forward(params: &NetworkParams, x: &[f64]) -> Result<f64> {
    if x.len() != params.n_inputs {
        return Err(Error::DimensionMismatch(format!(
            "input has {} entries, network expects {}",
            x.len(),
            params.n_inputs
        )));
    }
    let mut h = vec![0.0; params.n_hidden];
    Ok(forward_with(params, x, &mut h))
}

/// Sigmoid of the network output; the class-1 probability under the
/// cross-entropy model.
pub fn predict_prob(params: &NetworkParams, x: &[f64]) -> Result<f64> {
    Ok(sigmoid(forward(params, x)?))
}

pub(crate) fn forward_with(params: &NetworkParams, x: &[f64], h: &mut [f64]) -> f64 {
    let n_i = params.n_inputs;
    let theta = &params.theta;
    let b1_off = params.n_hidden * n_i;
    let w_off = b1_off + params.n_hidden;
    let mut out = theta[theta.len() - 1];
    for i in 0..params.n_hidden {
        let row = &theta[i * n_i..(i + 1) * n_i];
        let mut z = theta[b1_off + i];
        for (a, b) in row.iter().zip(x.iter()) {
            z += a * b;
        }
        let hi = z.tanh();
        h[i] = hi;
        out += theta[w_off + i] * hi;
    }
    out
}

fn sample_loss(f: f64, y: f64, loss: LossKind) -> f64 {
    match loss {
        LossKind::Squared => {
            let r = f - y;
            r * r
        }
        // softplus(f) - y*f = -y*log(sigmoid(f)) - (1-y)*log(1-sigmoid(f))
        LossKind::BinaryCrossEntropy => softplus(f) - y * f,
    }
}

/// Mean loss of `params` over the whole dataset.
pub fn empirical_risk(params: &NetworkParams, data: &Dataset, loss: LossKind) -> Result<f64> {
    check_compat(params, data, loss)?;
    let mut h = vec![0.0; params.n_hidden];
    Ok(risk_with(params, data, loss, &mut h))
}

pub(crate) fn risk_with(params: &NetworkParams, data: &Dataset, loss: LossKind, h: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..data.len() {
        let f = forward_with(params, data.row(i), h);
        total += sample_loss(f, data.target(i), loss);
    }
    total / data.len() as f64
}

/// Accumulates `scale` times the gradient of the sample loss at
/// (`x`, `y`) into `grad` (flat layout). `h` is hidden-activation scratch.
pub(crate) fn add_sample_grad(
    params: &NetworkParams,
    x: &[f64],
    y: f64,
    loss: LossKind,
    scale: f64,
    grad: &mut [f64],
    h: &mut [f64],
) {
    let n_i = params.n_inputs;
    let n_h = params.n_hidden;
    let theta = &params.theta;
    let b1_off = n_h * n_i;
    let w_off = b1_off + n_h;
    let f = forward_with(params, x, h);
    // d(sample loss)/d(f)
    let r = match loss {
        LossKind::Squared => 2.0 * (f - y),
        LossKind::BinaryCrossEntropy => sigmoid(f) - y,
    };
    let rs = r * scale;
    grad[w_off + n_h] += rs;
    for i in 0..n_h {
        let hi = h[i];
        grad[w_off + i] += rs * hi;
        let d = rs * theta[w_off + i] * (1.0 - hi * hi);
        grad[b1_off + i] += d;
        let g_row = &mut grad[i * n_i..(i + 1) * n_i];
        for (g, &xv) in g_row.iter_mut().zip(x.iter()) {
            *g += d * xv;
        }
    }
}

/// Gradient of the empirical risk, shaped like the parameters.
pub fn grad_risk(params: &NetworkParams, data: &Dataset, loss: LossKind) -> Result<NetworkParams> {
    check_compat(params, data, loss)?;
    let mut grad = vec![0.0; params.flat_len()];
    let mut h = vec![0.0; params.n_hidden];
    let scale = 1.0 / data.len() as f64;
    for i in 0..data.len() {
        add_sample_grad(params, data.row(i), data.target(i), loss, scale, &mut grad, &mut h);
    }
    if !grad.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteGradient);
    }
    Ok(NetworkParams { n_hidden: params.n_hidden, n_inputs: params.n_inputs, theta: grad })
}
