//! End-to-end selection pipelines.
//!
//! Three estimators are wired up:
//!
//! * `GroupLasso` — cross-validate the group-lasso strength, fit, select.
//! * `ErmAgl` — unpenalized pilot fit, adaptive weights from its column
//!   norms, cross-validate the adaptive strength, adaptive fit, select.
//! * `GlAgl` — like `ErmAgl` but the pilot is a cross-validated group-lasso
//!   fit, which empirically curbs false discoveries at higher noise.
//!
//! Selection thresholds the fitted first-layer column norms: feature `k` is
//! selected iff its norm strictly exceeds the cutoff.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use std::collections::HashMap;
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::net::{empirical_risk, Dataset, NetworkParams};
use crate::optim::{train, TrainConfig};
use crate::penalty::{
    adaptive_weights, group_norms, AdaptiveWeights, GroupNorms, PenaltySpec, DEFAULT_FREEZE_TOL,
};
use crate::seed::{derive_seed, TAG_CV_FIT, TAG_CV_SPLIT};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Column-norm cutoff below which a feature counts as dropped.
pub const DEFAULT_CUTOFF: f64 = 1e-3;
/// Exponent on inverse pilot norms in the adaptive weights.
pub const DEFAULT_GAMMA: f64 = 2.0;
/// Cross-validation folds.
pub const DEFAULT_CV_FOLDS: usize = 3;

/// Selection estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GroupLasso,
    ErmAgl,
    GlAgl,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Method::GroupLasso => "group_lasso",
            Method::ErmAgl => "erm_agl",
            Method::GlAgl => "gl_agl",
        };
        write!(f, "{name}")
    }
}

/// Hyperparameter grids. The adaptive stage reuses the lambda grid unless
/// an explicit zeta grid is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grids {
    pub lambda: Vec<f64>,
    pub zeta: Option<Vec<f64>>,
}

impl Default for Grids {
    fn default() -> Self {
        Grids {
            lambda: vec![0.001, 0.01, 0.1, 1.0, 2.0, 4.0, 8.0, 16.0],
            zeta: None,
        }
    }
}

impl Grids {
    pub fn new(lambda: Vec<f64>) -> Self {
        Grids { lambda, zeta: None }
    }

    pub fn zeta_grid(&self) -> &[f64] {
        self.zeta.as_deref().unwrap_or(&self.lambda)
    }

    pub fn validate(&self) -> Result<()> {
        for grid in [Some(&self.lambda), self.zeta.as_ref()].into_iter().flatten() {
            if grid.is_empty() {
                return Err(Error::Config("hyperparameter grid must not be empty".into()));
            }
            if grid.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Config(
                    "grid values must be finite and non-negative".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Everything a pipeline run needs besides the data and the grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub train: TrainConfig,
    pub gamma: f64,
    pub cutoff: f64,
    pub cv_folds: usize,
    pub freeze_tol: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            train: TrainConfig::default(),
            gamma: DEFAULT_GAMMA,
            cutoff: DEFAULT_CUTOFF,
            cv_folds: DEFAULT_CV_FOLDS,
            freeze_tol: DEFAULT_FREEZE_TOL,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.cutoff > 0.0) || !self.cutoff.is_finite() {
            return Err(Error::Config(format!("cutoff must be positive, got {}", self.cutoff)));
        }
        if self.cv_folds < 2 {
            return Err(Error::Config("cross-validation needs at least 2 folds".into()));
        }
        if !(self.freeze_tol >= 0.0) {
            return Err(Error::Config("freeze_tol must be non-negative".into()));
        }
        Ok(())
    }
}

/// One grid value's cross-validation score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub value: f64,
    pub mean_validation_loss: f64,
}

/// Output of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: Method,
    pub fitted: NetworkParams,
    pub norms: GroupNorms,
    pub selected: Vec<bool>,
    /// Group-lasso strength used for the (pilot) fit; 0 for `ErmAgl`.
    pub chosen_lambda: f64,
    /// Adaptive strength; `None` for plain `GroupLasso`.
    pub chosen_zeta: Option<f64>,
    pub cv_lambda: Vec<CvEntry>,
    pub cv_zeta: Vec<CvEntry>,
    /// Full-data objective per epoch of the final fit.
    pub trace: Vec<f64>,
}

/// Unpenalized fit; returns the parameters and the per-epoch objective.
pub fn fit_erm(data: &Dataset, cfg: &TrainConfig) -> Result<(NetworkParams, Vec<f64>)> {
    train(data, &PenaltySpec::None, cfg, None)
}

/// Group-lasso fit at a fixed strength.
pub fn fit_group_lasso(
    data: &Dataset,
    lambda: f64,
    cfg: &TrainConfig,
) -> Result<(NetworkParams, Vec<f64>)> {
    train(data, &PenaltySpec::GroupLasso { lambda }, cfg, None)
}

/// Adaptive group-lasso fit: weights `1/norm^gamma` from the pilot `init`,
/// warm-started at `init`. Pilot columns that are numerically zero are
/// frozen at zero.
pub fn fit_adaptive(
    data: &Dataset,
    zeta: f64,
    gamma: f64,
    init: &NetworkParams,
    cfg: &TrainConfig,
) -> Result<(NetworkParams, Vec<f64>)> {
    let weights = adaptive_weights(init, gamma, DEFAULT_FREEZE_TOL)?;
    train(data, &PenaltySpec::Adaptive { zeta, weights }, cfg, Some(init))
}

/// Thresholds fitted column norms: feature `k` is selected iff its norm
/// strictly exceeds `cutoff`.
pub fn select_features(params: &NetworkParams, cutoff: f64) -> Vec<bool> {
    assert!(cutoff > 0.0, "cutoff must be positive");
    (0..params.n_inputs()).map(|k| params.column_norm(k) > cutoff).collect()
}

/// K-fold cross-validation over a hyperparameter grid.
///
/// Samples are shuffled once (seeded from `cfg.seed`) and cut into
/// contiguous blocks; every grid value sees the same folds and the same
/// per-fold fit seeds, so scores are paired. The score is the unpenalized
/// validation loss under `cfg.loss`. Ties go to the smaller grid value.
/// A singleton grid short-circuits: no fits, empty table.
pub fn cross_validate<F>(
    data: &Dataset,
    grid: &[f64],
    folds: usize,
    cfg: &TrainConfig,
    fit: F,
) -> Result<(f64, Vec<CvEntry>)>
where
    F: Fn(&Dataset, f64, &TrainConfig) -> Result<NetworkParams> + Sync,
{
    if grid.is_empty() {
        return Err(Error::Config("hyperparameter grid must not be empty".into()));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("grid values must be finite".into()));
    }
    if grid.len() == 1 {
        return Ok((grid[0], Vec::new()));
    }
    if folds < 2 {
        return Err(Error::Config("cross-validation needs at least 2 folds".into()));
    }
    let n = data.len();
    if n < folds {
        return Err(Error::Config(format!("{n} samples cannot form {folds} folds")));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, TAG_CV_SPLIT, 0));
    order.shuffle(&mut rng);
    let bounds: Vec<usize> = (0..=folds).map(|f| f * n / folds).collect();

    let combos: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|gi| (0..folds).map(move |f| (gi, f)))
        .collect();
    let losses: Vec<Result<f64>> = combos
        .par_iter()
        .map(|&(gi, f)| {
            let val_idx = &order[bounds[f]..bounds[f + 1]];
            let train_idx: Vec<usize> = order[..bounds[f]]
                .iter()
                .chain(order[bounds[f + 1]..].iter())
                .copied()
                .collect();
            let train_data = data.subset(&train_idx)?;
            let val_data = data.subset(val_idx)?;
            let mut fold_cfg = cfg.clone();
            fold_cfg.seed = derive_seed(cfg.seed, TAG_CV_FIT, f as u64);
            let fitted = fit(&train_data, grid[gi], &fold_cfg)?;
            let loss = empirical_risk(&fitted, &val_data, cfg.loss)?;
            if !loss.is_finite() {
                return Err(Error::Contract(format!(
                    "non-finite validation loss at grid value {}",
                    grid[gi]
                )));
            }
            Ok(loss)
        })
        .collect();

    let mut table = Vec::with_capacity(grid.len());
    for (gi, &value) in grid.iter().enumerate() {
        let mut total = 0.0;
        for f in 0..folds {
            match &losses[gi * folds + f] {
                Ok(l) => total += l,
                Err(e) => return Err(clone_error(e)),
            }
        }
        table.push(CvEntry { value, mean_validation_loss: total / folds as f64 });
    }
    let mut best = &table[0];
    for entry in &table[1..] {
        if entry.mean_validation_loss < best.mean_validation_loss
            || (entry.mean_validation_loss == best.mean_validation_loss
                && entry.value < best.value)
        {
            best = entry;
        }
    }
    Ok((best.value, table))
}

// Error is not Clone (it may wrap sources); rebuild the few variants CV can
// produce for aggregation.
fn clone_error(e: &Error) -> Error {
    match e {
        Error::Diverged { epoch } => Error::Diverged { epoch: *epoch },
        Error::NonFiniteGradient => Error::NonFiniteGradient,
        other => Error::Contract(other.to_string()),
    }
}

/// Runs one estimator end to end and packages the outcome.
pub fn run_pipeline(
    data: &Dataset,
    method: Method,
    grids: &Grids,
    cfg: &PipelineConfig,
) -> Result<SelectionResult> {
    cfg.validate()?;
    grids.validate()?;
    let tc = &cfg.train;

    let (fitted, trace, chosen_lambda, chosen_zeta, cv_lambda, cv_zeta) = match method {
        Method::GroupLasso => {
            let (lambda, cv_lambda) =
                cross_validate(data, &grids.lambda, cfg.cv_folds, tc, |d, l, c| {
                    fit_group_lasso(d, l, c).map(|r| r.0)
                })?;
            let (fitted, trace) = fit_group_lasso(data, lambda, tc)?;
            (fitted, trace, lambda, None, cv_lambda, Vec::new())
        }
        Method::ErmAgl => {
            let (pilot, _) = fit_erm(data, tc)?;
            let (zeta, cv_zeta) = adaptive_stage(data, None, grids.zeta_grid(), cfg)?;
            let (fitted, trace) = adaptive_fit(data, zeta, &pilot, cfg, tc)?;
            (fitted, trace, 0.0, Some(zeta), Vec::new(), cv_zeta)
        }
        Method::GlAgl => {
            let (lambda, cv_lambda) =
                cross_validate(data, &grids.lambda, cfg.cv_folds, tc, |d, l, c| {
                    fit_group_lasso(d, l, c).map(|r| r.0)
                })?;
            let (pilot, _) = fit_group_lasso(data, lambda, tc)?;
            let (zeta, cv_zeta) = adaptive_stage(data, Some(lambda), grids.zeta_grid(), cfg)?;
            let (fitted, trace) = adaptive_fit(data, zeta, &pilot, cfg, tc)?;
            (fitted, trace, lambda, Some(zeta), cv_lambda, cv_zeta)
        }
    };

    if let Some(zeta) = chosen_zeta {
        let floor = (data.len() as f64).powf(-cfg.gamma / 4.0);
        if zeta < floor {
            log::warn!(
                "chosen zeta {zeta} is below n^(-gamma/4) = {floor:.3e}; \
                 the adaptive stage may be undershrinking"
            );
        }
    }

    let norms = group_norms(&fitted);
    let selected = select_features(&fitted, cfg.cutoff);
    Ok(SelectionResult {
        method,
        fitted,
        norms,
        selected,
        chosen_lambda,
        chosen_zeta,
        cv_lambda,
        cv_zeta,
        trace,
    })
}

/// Chooses zeta by cross-validation. Every fold refits its own pilot on
/// the fold's training rows (unpenalized when `pilot_lambda` is `None`,
/// group lasso at that strength otherwise) and derives the adaptive
/// weights from it. Reusing the full-data pilot here would leak: a pilot
/// that has seen the fold's validation rows flatters small zeta values,
/// whose fits barely move away from it. Fold pilots are cached under the
/// fold seed since every grid value shares them.
fn adaptive_stage(
    data: &Dataset,
    pilot_lambda: Option<f64>,
    zeta_grid: &[f64],
    cfg: &PipelineConfig,
) -> Result<(f64, Vec<CvEntry>)> {
    let cache: Mutex<HashMap<u64, (NetworkParams, AdaptiveWeights)>> = Mutex::new(HashMap::new());
    cross_validate(data, zeta_grid, cfg.cv_folds, &cfg.train, |d, z, c| {
        let cached = cache.lock().unwrap().get(&c.seed).cloned();
        let (fold_pilot, weights) = match cached {
            Some(pair) => pair,
            None => {
                let (fold_pilot, _) = match pilot_lambda {
                    Some(lambda) => fit_group_lasso(d, lambda, c)?,
                    None => fit_erm(d, c)?,
                };
                let weights = adaptive_weights(&fold_pilot, cfg.gamma, cfg.freeze_tol)?;
                let pair = (fold_pilot, weights);
                cache.lock().unwrap().insert(c.seed, pair.clone());
                pair
            }
        };
        train(d, &PenaltySpec::Adaptive { zeta: z, weights }, c, Some(&fold_pilot)).map(|r| r.0)
    })
}

fn adaptive_fit(
    data: &Dataset,
    zeta: f64,
    pilot: &NetworkParams,
    cfg: &PipelineConfig,
    tc: &TrainConfig,
) -> Result<(NetworkParams, Vec<f64>)> {
    let weights = adaptive_weights(pilot, cfg.gamma, cfg.freeze_tol)?;
    train(data, &PenaltySpec::Adaptive { zeta, weights }, tc, Some(pilot))
}

/// Repeats the pipeline with seeds `seed`, `seed+1`, ... and returns each
/// feature's selection frequency.
pub fn stability_run(
    data: &Dataset,
    method: Method,
    grids: &Grids,
    cfg: &PipelineConfig,
    repeats: usize,
) -> Result<Vec<f64>> {
    if repeats == 0 {
        return Err(Error::Config("stability run needs at least one repeat".into()));
    }
    let masks: Vec<Result<Vec<bool>>> = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let mut run_cfg = cfg.clone();
            run_cfg.train.seed = cfg.train.seed + r as u64;
            run_pipeline(data, method, grids, &run_cfg).map(|sel| sel.selected)
        })
        .collect();
    let mut freq = vec![0.0; data.n_inputs()];
    for mask in &masks {
        match mask {
            Ok(m) => {
                for (k, &sel) in m.iter().enumerate() {
                    if sel {
                        freq[k] += 1.0;
                    }
                }
            }
            Err(e) => return Err(clone_error(e)),
        }
    }
    for f in &mut freq {
        *f /= repeats as f64;
    }
    Ok(freq)
}
