//! Synthetic ground truth and data for the selection experiments.
//!
//! A ground-truth network is drawn with first-layer weights on significant
//! features from N(1,1), hidden and output biases from N(0,1), output
//! weights from N(1,1), and first-layer columns of non-significant features
//! pinned to exactly zero. Draws are rejected until the network is
//! irreducible, so the true support is well defined. Inputs are standard
//! normal; regression targets add N(0, sigma2) noise to the network output.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equivalence::{is_irreducible, DEFAULT_IRREDUCIBILITY_TOL};
use crate::error::{Error, Result};
use crate::metrics::{ExperimentCell, ExperimentReport};
use crate::net::{forward, Dataset, NetworkParams, Task};
use crate::pipeline::{run_pipeline, Grids, Method, PipelineConfig};
use crate::seed::{derive_seed, TAG_DATA, TAG_MODEL, TAG_TRAIN};

/// Maximum irreducibility rejections before model generation gives up.
const MAX_REJECTIONS: usize = 100;

/// A true network together with its feature support and noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthModel {
    pub params: NetworkParams,
    /// `support[k]` is true iff feature `k` enters the true function.
    pub support: Vec<bool>,
    /// Variance of the additive observation noise.
    pub sigma2: f64,
}

/// Shape and size of a simulation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Number of significant input features.
    pub n_significant: usize,
    /// Number of pure-noise input features.
    pub n_noise: usize,
    /// Hidden width of both the true and the fitted networks.
    pub n_hidden: usize,
    /// Samples per generated dataset.
    pub n_samples: usize,
    /// Noise variances to sweep.
    pub sigma2_list: Vec<f64>,
    /// Replications per noise level.
    pub repeats: usize,
    /// Base seed; all per-cell seeds derive from it.
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_significant == 0 {
            return Err(Error::Config("need at least one significant feature".into()));
        }
        if self.n_hidden == 0 {
            return Err(Error::Config("need at least one hidden node".into()));
        }
        if self.n_samples == 0 {
            return Err(Error::Config("need at least one sample".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("need at least one replication".into()));
        }
        if self.sigma2_list.is_empty() {
            return Err(Error::Config("sigma2_list must not be empty".into()));
        }
        if self.sigma2_list.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::Config("noise variances must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn n_inputs(&self) -> usize {
        self.n_significant + self.n_noise
    }
}

/// Draws an irreducible ground-truth model for one replication.
///
/// Rejection-samples the network until it passes the irreducibility check,
/// erroring after 100 rejected draws. Columns for the `n_noise` trailing
/// features are exactly zero.
pub fn generate_true_model(cfg: &SimConfig, sigma2: f64, seed: u64) -> Result<GroundTruthModel> {
    cfg.validate()?;
    if !sigma2.is_finite() || sigma2 < 0.0 {
        return Err(Error::Config(format!("sigma2 must be finite and non-negative, got {sigma2}")));
    }
    let n_inputs = cfg.n_inputs();
    let shifted = Normal::new(1.0, 1.0).expect("valid normal");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_REJECTIONS {
        let mut first_layer = vec![0.0; cfg.n_hidden * n_inputs];
        for i in 0..cfg.n_hidden {
            for k in 0..cfg.n_significant {
                first_layer[i * n_inputs + k] = rng.sample(shifted);
            }
        }
        let bias1: Vec<f64> =
            (0..cfg.n_hidden).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let output_weights: Vec<f64> =
            (0..cfg.n_hidden).map(|_| rng.sample(shifted)).collect();
        let bias2: f64 = rng.sample(StandardNormal);
        let params = NetworkParams::new(n_inputs, first_layer, bias1, output_weights, bias2)?;
        if is_irreducible(&params, DEFAULT_IRREDUCIBILITY_TOL) {
            let mut support = vec![true; cfg.n_significant];
            support.extend(std::iter::repeat(false).take(cfg.n_noise));
            return Ok(GroundTruthModel { params, support, sigma2 });
        }
    }
    Err(Error::Contract(format!(
        "failed to draw an irreducible model in {MAX_REJECTIONS} attempts"
    )))
}

/// Draws `n` samples from the model: standard-normal inputs, targets equal
/// to the network output plus N(0, sigma2) noise. At `sigma2 = 0` targets
/// equal the network output exactly.
pub fn generate_dataset(model: &GroundTruthModel, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("need at least one sample".into()));
    }
    let n_inputs = model.params.n_inputs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<f64> =
        (0..n * n_inputs).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let sd = model.sigma2.sqrt();
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        let f = forward(&model.params, &inputs[i * n_inputs..(i + 1) * n_inputs])?;
        let eps: f64 = rng.sample(StandardNormal);
        targets.push(f + sd * eps);
    }
    Dataset::from_flat(inputs, n_inputs, targets, Task::Regression)
}

/// Runs the full selection experiment: for every noise level and
/// replication, draws a fresh model and dataset, runs each method's
/// pipeline, and records the selected mask (or the failure message — a
/// failed fit is recorded, not fatal).
///
/// Per-cell model/data/train seeds derive from `cfg.seed`; the seed and
/// hidden width inside `pipeline_cfg.train` are replaced by per-cell seeds
/// and `cfg.n_hidden`. Cells are ordered by noise level, then replication,
/// then method.
pub fn run_experiment(
    cfg: &SimConfig,
    methods: &[Method],
    grids: &Grids,
    pipeline_cfg: &PipelineConfig,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(Error::Config("need at least one method".into()));
    }
    let indices: Vec<(usize, usize)> = (0..cfg.sigma2_list.len())
        .flat_map(|si| (0..cfg.repeats).map(move |r| (si, r)))
        .collect();
    let per_cell: Vec<Result<Vec<ExperimentCell>>> = indices
        .par_iter()
        .map(|&(si, r)| {
            let sigma2 = cfg.sigma2_list[si];
            let idx = (si * cfg.repeats + r) as u64;
            let model = generate_true_model(cfg, sigma2, derive_seed(cfg.seed, TAG_MODEL, idx))?;
            let data =
                generate_dataset(&model, cfg.n_samples, derive_seed(cfg.seed, TAG_DATA, idx))?;
            let mut cell_cfg = pipeline_cfg.clone();
            cell_cfg.train.seed = derive_seed(cfg.seed, TAG_TRAIN, idx);
            // the experiment's hidden width applies to the fitted networks
            // too, overriding whatever the training config carried
            cell_cfg.train.n_hidden = cfg.n_hidden;
            let cells = methods
                .iter()
                .map(|&method| {
                    let (selected, error) = match run_pipeline(&data, method, grids, &cell_cfg) {
                        Ok(sel) => (Some(sel.selected), None),
                        Err(e) => (None, Some(e.to_string())),
                    };
                    ExperimentCell {
                        sigma2,
                        method,
                        replication: r,
                        true_support: model.support.clone(),
                        selected,
                        error,
                    }
                })
                .collect();
            Ok(cells)
        })
        .collect();
    let mut cells = Vec::with_capacity(indices.len() * methods.len());
    for group in per_cell {
        cells.extend(group?);
    }
    Ok(ExperimentReport { cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equivalence::support_mask_true;

    fn base_cfg() -> SimConfig {
        SimConfig {
            n_significant: 3,
            n_noise: 2,
            n_hidden: 4,
            n_samples: 50,
            sigma2_list: vec![0.0, 0.4],
            repeats: 2,
            seed: 99,
        }
    }

    #[test]
    fn support_layout_is_significant_then_noise() {
        let model = generate_true_model(&base_cfg(), 0.2, 7).unwrap();
        assert_eq!(model.support, vec![true, true, true, false, false]);
        assert_eq!(support_mask_true(&model).unwrap(), model.support);
    }

    #[test]
    fn noise_columns_are_exactly_zero() {
        let model = generate_true_model(&base_cfg(), 0.2, 8).unwrap();
        assert_eq!(model.params.column_norm(3), 0.0);
        assert_eq!(model.params.column_norm(4), 0.0);
        assert!(model.params.column_norm(0) > 0.0);
    }

    #[test]
    fn generated_models_are_irreducible() {
        for seed in 0..10 {
            let model = generate_true_model(&base_cfg(), 0.5, seed).unwrap();
            assert!(is_irreducible(&model.params, DEFAULT_IRREDUCIBILITY_TOL));
        }
    }

    #[test]
    fn model_generation_is_deterministic() {
        let a = generate_true_model(&base_cfg(), 0.2, 42).unwrap();
        let b = generate_true_model(&base_cfg(), 0.2, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_true_model(&base_cfg(), 0.2, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_noise_targets_equal_network_output() {
        let model = generate_true_model(&base_cfg(), 0.0, 5).unwrap();
        let data = generate_dataset(&model, 40, 6).unwrap();
        for i in 0..data.len() {
            let f = forward(&model.params, data.row(i)).unwrap();
            assert_eq!(data.target(i), f);
        }
    }

    #[test]
    fn dataset_is_deterministic_in_seed() {
        let model = generate_true_model(&base_cfg(), 0.3, 5).unwrap();
        assert_eq!(generate_dataset(&model, 30, 9).unwrap(), generate_dataset(&model, 30, 9).unwrap());
        assert_ne!(generate_dataset(&model, 30, 9).unwrap(), generate_dataset(&model, 30, 10).unwrap());
    }

    #[test]
    fn sample_moments_match_design() {
        // large draws; tolerances several standard errors wide
        let cfg = SimConfig {
            n_significant: 20,
            n_noise: 0,
            n_hidden: 50,
            n_samples: 1,
            sigma2_list: vec![0.8],
            repeats: 1,
            seed: 0,
        };
        let model = generate_true_model(&cfg, 0.8, 11).unwrap();
        let entries: Vec<f64> = (0..50)
            .flat_map(|i| model.params.row(i).to_vec())
            .collect();
        let mean = entries.iter().sum::<f64>() / entries.len() as f64;
        assert!((mean - 1.0).abs() < 0.15, "first-layer mean {mean}");
        let var = entries.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (entries.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.25, "first-layer variance {var}");

        let small = generate_true_model(&base_cfg(), 0.8, 12).unwrap();
        let n = 4000;
        let data = generate_dataset(&small, n, 13).unwrap();
        let x_mean: f64 =
            (0..n).map(|i| data.row(i)[0]).sum::<f64>() / n as f64;
        assert!(x_mean.abs() < 0.08, "input mean {x_mean}");
        let residuals: Vec<f64> = (0..n)
            .map(|i| data.target(i) - forward(&small.params, data.row(i)).unwrap())
            .collect();
        let r_mean = residuals.iter().sum::<f64>() / n as f64;
        let r_var = residuals.iter().map(|v| (v - r_mean) * (v - r_mean)).sum::<f64>()
            / (n - 1) as f64;
        assert!((r_var - 0.8).abs() < 0.1, "residual variance {r_var}");
    }

    #[test]
    fn rejects_invalid_config() {
        let mut cfg = base_cfg();
        cfg.n_significant = 0;
        assert!(generate_true_model(&cfg, 0.1, 0).is_err());
        let mut cfg = base_cfg();
        cfg.sigma2_list = vec![-0.5];
        assert!(cfg.validate().is_err());
        assert!(generate_true_model(&base_cfg(), -0.1, 0).is_err());
    }
}
