//! Mini-batch training of penalized networks.
//!
//! Adam drives the data-fit term. The group penalty enters in one of two
//! ways: `Subgradient` adds the penalty's subgradient (taken as zero on
//! groups with zero norm) to the risk gradient before the Adam step;
//! `Proximal` lets Adam handle only the risk and then applies the block
//! soft threshold to every penalized group, which produces exact zeros.
//!
//! Frozen groups (see [`crate::penalty::AdaptiveWeights`]) are pinned: they
//! start at exactly zero, their gradient entries are cleared every step,
//! and Adam's update of a coordinate with zero moments is exactly zero, so
//! they stay bit-exact zero throughout.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{self, Dataset, LossKind, NetworkParams, Task};
use crate::penalty::{soft_threshold_strided, AdaptiveWeight, PenaltySpec};

/// How the penalty is folded into the updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    Subgradient,
    Proximal,
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Hidden width used when no explicit initialization is given.
    pub n_hidden: usize,
    pub epochs: usize,
    /// Clamped to the dataset size.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub mode: TrainMode,
    pub loss: LossKind,
    pub seed: u64,
    /// Initial weights are i.i.d. uniform on [-init_scale, init_scale].
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_hidden: 10,
            epochs: 10_000,
            batch_size: 200,
            learning_rate: 1e-3,
            mode: TrainMode::Subgradient,
            loss: LossKind::Squared,
            seed: 0,
            init_scale: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_hidden == 0 {
            return Err(Error::Config("n_hidden must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning_rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if !(self.init_scale > 0.0) || !self.init_scale.is_finite() {
            return Err(Error::Config(format!(
                "init_scale must be positive and finite, got {}",
                self.init_scale
            )));
        }
        Ok(())
    }
}

/// Adam moment estimates over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    learning_rate: f64,
}

impl AdamState {
    /// Fresh state with the canonical moment decays (0.9, 0.999) and
    /// epsilon 1e-8.
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            learning_rate,
        }
    }

    pub fn with_hyperparameters(
        n_params: usize,
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
            return Err(Error::Config("Adam decays must lie in [0, 1)".into()));
        }
        if !(learning_rate > 0.0) || !(epsilon > 0.0) {
            return Err(Error::Config("learning rate and epsilon must be positive".into()));
        }
        Ok(AdamState { m: vec![0.0; n_params], v: vec![0.0; n_params], step: 0, beta1, beta2, epsilon, learning_rate })
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `theta` along `grad`.
    pub(crate) fn update(&mut self, theta: &mut [f64], grad: &[f64]) -> Result<()> {
        debug_assert_eq!(theta.len(), self.m.len());
        debug_assert_eq!(grad.len(), self.m.len());
        if !grad.iter().all(|g| g.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powf(self.step as f64);
        let bc2 = 1.0 - self.beta2.powf(self.step as f64);
        let lr = self.learning_rate;
        for j in 0..theta.len() {
            let g = grad[j];
            self.m[j] = self.beta1 * self.m[j] + (1.0 - self.beta1) * g;
            self.v[j] = self.beta2 * self.v[j] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[j] / bc1;
            let v_hat = self.v[j] / bc2;
            theta[j] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// One Adam step on a parameter set, with the gradient shaped like the
/// parameters. Errors on shape mismatch or a non-finite gradient.
pub fn adam_step(state: &mut AdamState, params: &mut NetworkParams, grad: &NetworkParams) -> Result<()> {
    if params.n_hidden() != grad.n_hidden() || params.n_inputs() != grad.n_inputs() {
        return Err(Error::DimensionMismatch("gradient shape differs from parameters".into()));
    }
    if state.len() != params.flat_len() {
        return Err(Error::DimensionMismatch(format!(
            "Adam state over {} entries, parameters have {}",
            state.len(),
            params.flat_len()
        )));
    }
    state.update(params.flat_mut(), grad.flat())
}

/// Random initialization: every entry i.i.d. uniform on [-scale, scale].
pub fn init_params<R: Rng + ?Sized>(
    n_hidden: usize,
    n_inputs: usize,
    scale: f64,
    rng: &mut R,
) -> Result<NetworkParams> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Config(format!("init scale must be positive and finite, got {scale}")));
    }
    let len = net::flat_len(n_hidden, n_inputs);
    let theta: Vec<f64> = (0..len).map(|_| rng.random_range(-scale..=scale)).collect();
    NetworkParams::from_flat(n_hidden, n_inputs, &theta)
}

/// Full objective: empirical risk plus the penalty value.
pub fn objective(
    params: &NetworkParams,
    data: &Dataset,
    spec: &PenaltySpec,
    loss: LossKind,
) -> Result<f64> {
    Ok(net::empirical_risk(params, data, loss)? + spec.value(params)?)
}

enum Group {
    /// Effective penalty strength on this group (possibly zero).
    Free(f64),
    Frozen,
}

/// Trains a network on `data` under `spec`.
///
/// Starts from `init` when given (which also fixes the architecture),
/// otherwise from a fresh uniform initialization of width `cfg.n_hidden`.
/// Returns the trained parameters and the trace of the full-data objective
/// after each epoch. A penalty strength of exactly zero takes the same
/// code path as no penalty at all, so e.g. group lasso at lambda 0
/// reproduces the unpenalized fit bit for bit.
pub fn train(
    data: &Dataset,
    spec: &PenaltySpec,
    cfg: &TrainConfig,
    init: Option<&NetworkParams>,
) -> Result<(NetworkParams, Vec<f64>)> {
    cfg.validate()?;
    spec.validate(data.n_inputs())?;
    if cfg.loss == LossKind::BinaryCrossEntropy && data.task() != Task::Binary {
        return Err(Error::Contract("binary cross-entropy requires a binary task".into()));
    }

    let n_inputs = data.n_inputs();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = match init {
        Some(p) => {
            if p.n_inputs() != n_inputs {
                return Err(Error::DimensionMismatch(format!(
                    "init expects {} inputs, dataset has {}",
                    p.n_inputs(),
                    n_inputs
                )));
            }
            p.clone()
        }
        None => init_params(cfg.n_hidden, n_inputs, cfg.init_scale, &mut rng)?,
    };
    let n_hidden = params.n_hidden();

    let groups: Vec<Group> = match spec {
        PenaltySpec::None => vec![],
        PenaltySpec::GroupLasso { lambda } => (0..n_inputs).map(|_| Group::Free(*lambda)).collect(),
        PenaltySpec::Adaptive { zeta, weights } => weights
            .iter()
            .map(|w| match w {
                AdaptiveWeight::Value(v) => Group::Free(zeta * v),
                AdaptiveWeight::Frozen => Group::Frozen,
            })
            .collect(),
    };
    // pin frozen groups to exact zero before the first step
    for (k, group) in groups.iter().enumerate() {
        if matches!(group, Group::Frozen) {
            let theta = params.flat_mut();
            for i in 0..n_hidden {
                theta[i * n_inputs + k] = 0.0;
            }
        }
    }

    let n = data.len();
    let batch = cfg.batch_size.min(n);
    let mut adam = AdamState::new(params.flat_len(), cfg.learning_rate);
    let mut grad = vec![0.0; params.flat_len()];
    let mut h = vec![0.0; n_hidden];
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            grad.fill(0.0);
            let scale = 1.0 / chunk.len() as f64;
            for &idx in chunk {
                net::add_sample_grad(
                    &params,
                    data.row(idx),
                    data.target(idx),
                    cfg.loss,
                    scale,
                    &mut grad,
                    &mut h,
                );
            }
            if cfg.mode == TrainMode::Subgradient {
                for (k, group) in groups.iter().enumerate() {
                    if let Group::Free(s) = group {
                        if *s > 0.0 {
                            let theta = params.flat();
                            let mut sq = 0.0;
                            for i in 0..n_hidden {
                                let w = theta[i * n_inputs + k];
                                sq += w * w;
                            }
                            let norm = sq.sqrt();
                            if norm > 0.0 {
                                for i in 0..n_hidden {
                                    grad[i * n_inputs + k] += s * theta[i * n_inputs + k] / norm;
                                }
                            }
                        }
                    }
                }
            }
            for (k, group) in groups.iter().enumerate() {
                if matches!(group, Group::Frozen) {
                    for i in 0..n_hidden {
                        grad[i * n_inputs + k] = 0.0;
                    }
                }
            }
            adam.update(params.flat_mut(), &grad).map_err(|e| match e {
                Error::NonFiniteGradient => Error::Diverged { epoch },
                other => other,
            })?;
            if cfg.mode == TrainMode::Proximal {
                for (k, group) in groups.iter().enumerate() {
                    if let Group::Free(s) = group {
                        if *s > 0.0 {
                            soft_threshold_strided(
                                params.flat_mut(),
                                k,
                                n_inputs,
                                n_hidden,
                                cfg.learning_rate * s,
                            );
                        }
                    }
                }
            }
        }
        let value = net::risk_with(&params, data, cfg.loss, &mut h) + spec.value(&params)?;
        if !value.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        trace.push(value);
    }

    if !params.flat().iter().all(|v| v.is_finite()) {
        return Err(Error::Diverged { epoch: cfg.epochs });
    }
    Ok((params, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalty::adaptive_weights;
    use approx::assert_relative_eq;
    use rand_distr::StandardNormal;

    fn toy_regression(n: usize, n_inputs: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs: Vec<f64> =
            (0..n * n_inputs).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        // target depends only on feature 0
        let targets: Vec<f64> = (0..n)
            .map(|i| (1.5 * inputs[i * n_inputs]).tanh() + 0.3)
            .collect();
        Dataset::from_flat(inputs, n_inputs, targets, Task::Regression).unwrap()
    }

    fn quick_cfg(epochs: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            n_hidden: 3,
            epochs,
            batch_size: 32,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn adam_first_step_has_learning_rate_magnitude() {
        let mut state = AdamState::new(1, 0.05);
        let mut theta = vec![0.0];
        state.update(&mut theta, &[3.0]).unwrap();
        assert!((theta[0] - (-0.05)).abs() < 1e-6 * 0.05);
        let mut state = AdamState::new(1, 0.05);
        let mut theta = vec![0.0];
        state.update(&mut theta, &[-0.04]).unwrap();
        assert!((theta[0] - 0.05).abs() < 1e-6 * 0.05);
    }

    #[test]
    fn adam_zero_gradient_is_a_noop() {
        let mut state = AdamState::new(3, 0.01);
        let mut theta = vec![0.3, -0.7, 0.0];
        let before = theta.clone();
        state.update(&mut theta, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(theta, before);
    }

    #[test]
    fn adam_rejects_non_finite_gradient() {
        let mut state = AdamState::new(1, 0.01);
        let mut theta = vec![0.0];
        assert!(matches!(
            state.update(&mut theta, &[f64::NAN]),
            Err(Error::NonFiniteGradient)
        ));
    }

    #[test]
    fn adam_step_checks_shapes() {
        let mut params = NetworkParams::zeros(2, 2).unwrap();
        let grad = NetworkParams::zeros(3, 2).unwrap();
        let mut state = AdamState::new(params.flat_len(), 0.01);
        assert!(adam_step(&mut state, &mut params, &grad).is_err());
    }

    #[test]
    fn adam_step_matches_flat_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut params = init_params(2, 2, 0.5, &mut rng).unwrap();
        let grad_flat: Vec<f64> =
            (0..params.flat_len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let grad = NetworkParams::from_flat(2, 2, &grad_flat).unwrap();
        let mut expected = params.to_flat();
        let mut s1 = AdamState::new(expected.len(), 0.01);
        s1.update(&mut expected, &grad_flat).unwrap();
        let mut s2 = AdamState::new(params.flat_len(), 0.01);
        adam_step(&mut s2, &mut params, &grad).unwrap();
        assert_eq!(params.to_flat(), expected);
        assert_eq!(s1, s2);
    }

    #[test]
    fn init_params_respects_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let p = init_params(5, 4, 0.25, &mut rng).unwrap();
        assert!(p.flat().iter().all(|v| v.abs() <= 0.25));
        assert!(p.flat().iter().any(|v| v.abs() > 0.01));
    }

    #[test]
    fn train_is_deterministic() {
        let data = toy_regression(64, 2, 1);
        let cfg = quick_cfg(40, 5);
        let spec = PenaltySpec::GroupLasso { lambda: 0.05 };
        let (p1, t1) = train(&data, &spec, &cfg, None).unwrap();
        let (p2, t2) = train(&data, &spec, &cfg, None).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(t1, t2);
        let (p3, _) = train(&data, &spec, &quick_cfg(40, 6), None).unwrap();
        assert_ne!(p1, p3);
    }

    #[test]
    fn trace_has_one_entry_per_epoch_and_improves() {
        let data = toy_regression(64, 2, 2);
        let cfg = quick_cfg(60, 3);
        let spec = PenaltySpec::None;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let init = init_params(cfg.n_hidden, 2, cfg.init_scale, &mut rng).unwrap();
        let initial = objective(&init, &data, &spec, cfg.loss).unwrap();
        let (fitted, trace) = train(&data, &spec, &cfg, None).unwrap();
        assert_eq!(trace.len(), 60);
        let last = *trace.last().unwrap();
        assert!(last <= initial, "objective rose: {last} vs {initial}");
        assert_relative_eq!(
            objective(&fitted, &data, &spec, cfg.loss).unwrap(),
            last,
            epsilon = 1e-12
        );
    }

    #[test]
    fn huge_lambda_proximal_zeroes_every_group() {
        let data = toy_regression(64, 3, 3);
        let mut cfg = quick_cfg(30, 4);
        cfg.mode = TrainMode::Proximal;
        let spec = PenaltySpec::GroupLasso { lambda: 1e6 };
        let (fitted, trace) = train(&data, &spec, &cfg, None).unwrap();
        for k in 0..3 {
            assert_eq!(fitted.column_norm(k), 0.0);
        }
        assert!(trace.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn subgradient_objective_decreases_under_penalty() {
        let data = toy_regression(80, 2, 4);
        let cfg = quick_cfg(80, 5);
        let spec = PenaltySpec::GroupLasso { lambda: 0.1 };
        let (_, trace) = train(&data, &spec, &cfg, None).unwrap();
        assert!(trace.last().unwrap() < trace.first().unwrap());
    }

    #[test]
    fn frozen_groups_stay_exactly_zero() {
        let data = toy_regression(64, 3, 5);
        // pilot with an exactly zero column 2
        let pilot = NetworkParams::from_rows(
            &[vec![0.4, 0.1, 0.0], vec![-0.2, 0.3, 0.0], vec![0.1, -0.1, 0.0]],
            &[0.1, -0.1, 0.2],
            &[0.5, 0.4, -0.3],
            0.0,
        )
        .unwrap();
        let weights = adaptive_weights(&pilot, 2.0, 1e-12).unwrap();
        assert!(weights.is_frozen(2));
        for mode in [TrainMode::Subgradient, TrainMode::Proximal] {
            let mut cfg = quick_cfg(50, 6);
            cfg.mode = mode;
            let spec = PenaltySpec::Adaptive { zeta: 0.01, weights: weights.clone() };
            let (fitted, _) = train(&data, &spec, &cfg, Some(&pilot)).unwrap();
            for i in 0..3 {
                assert_eq!(fitted.weight(i, 2), 0.0);
            }
            // unpenalized coordinates did move
            assert_ne!(fitted.weight(0, 0), pilot.weight(0, 0));
        }
    }

    #[test]
    fn group_lasso_at_zero_equals_erm_bit_for_bit() {
        let data = toy_regression(96, 2, 6);
        let cfg = quick_cfg(50, 7);
        let (erm, erm_trace) = train(&data, &PenaltySpec::None, &cfg, None).unwrap();
        for mode in [TrainMode::Subgradient, TrainMode::Proximal] {
            let mut c = cfg.clone();
            c.mode = mode;
            let (gl, gl_trace) =
                train(&data, &PenaltySpec::GroupLasso { lambda: 0.0 }, &c, None).unwrap();
            assert_eq!(erm, gl);
            assert_eq!(erm_trace, gl_trace);
        }
    }

    #[test]
    fn constant_target_fit_learns_the_mean() {
        // constant targets from a zero init: every hidden activation is
        // tanh(0) = 0, so only the output bias has a gradient and the fit
        // reduces to the one-dimensional mean problem with minimizer c
        let c = 1.2;
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let inputs: Vec<f64> = (0..200 * 2).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let data =
            Dataset::from_flat(inputs, 2, vec![c; 200], Task::Regression).unwrap();
        let cfg = TrainConfig {
            n_hidden: 3,
            epochs: 3000,
            batch_size: 50,
            seed: 8,
            ..TrainConfig::default()
        };
        let start = NetworkParams::zeros(3, 2).unwrap();
        let (fitted, trace) = train(&data, &PenaltySpec::None, &cfg, Some(&start)).unwrap();
        assert!((fitted.bias2() - c).abs() < 0.05, "bias2 = {}", fitted.bias2());
        assert!(*trace.last().unwrap() < 1e-3);
        // the hidden paths never receive a gradient, so they stay put
        for k in 0..2 {
            assert_eq!(fitted.column_norm(k), 0.0);
        }
        assert_eq!(fitted.output_weights(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn bce_training_separates_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let inputs: Vec<f64> = (0..120).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let targets: Vec<f64> = inputs.iter().map(|&x| if x > 0.0 { 1.0 } else { 0.0 }).collect();
        let data = Dataset::from_flat(inputs.clone(), 1, targets, Task::Binary).unwrap();
        let cfg = TrainConfig {
            n_hidden: 2,
            epochs: 400,
            batch_size: 120,
            loss: LossKind::BinaryCrossEntropy,
            seed: 9,
            ..TrainConfig::default()
        };
        let (fitted, trace) = train(&data, &PenaltySpec::None, &cfg, None).unwrap();
        assert!(trace.last().unwrap() < trace.first().unwrap());
        let hits = (0..data.len())
            .filter(|&i| {
                let p = crate::net::predict_prob(&fitted, data.row(i)).unwrap();
                (p >= 0.5) == (data.target(i) == 1.0)
            })
            .count();
        assert!(hits as f64 / data.len() as f64 > 0.9);
    }

    #[test]
    fn bce_on_regression_task_is_rejected() {
        let data = toy_regression(32, 2, 7);
        let mut cfg = quick_cfg(10, 0);
        cfg.loss = LossKind::BinaryCrossEntropy;
        assert!(train(&data, &PenaltySpec::None, &cfg, None).is_err());
    }

    #[test]
    fn batch_size_is_clamped_to_dataset() {
        let data = toy_regression(16, 2, 8);
        let mut cfg = quick_cfg(10, 0);
        cfg.batch_size = 1000;
        assert!(train(&data, &PenaltySpec::None, &cfg, None).is_ok());
    }

    #[test]
    fn init_shape_mismatch_is_rejected() {
        let data = toy_regression(16, 2, 9);
        let init = NetworkParams::zeros(3, 5).unwrap();
        assert!(train(&data, &PenaltySpec::None, &quick_cfg(5, 0), Some(&init)).is_err());
    }
}
