//! Group penalties over first-layer columns.
//!
//! Feature `k`'s group is column `k` of the first layer. The group-lasso
//! penalty sums the Euclidean column norms; the adaptive variant weights
//! each column by an inverse power of its norm under a pilot estimate.
//!
//! A pilot column whose norm is at or below `freeze_tol` yields an infinite
//! weight in exact arithmetic. Such groups are marked `Frozen`: the trainer
//! pins them to exact zero and they are excluded from the penalty value and
//! from gradients. Dropping the (infinite-weight, zero-norm) product this
//! way changes the objective by at most an additive constant, so minimizers
//! are unaffected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::NetworkParams;

/// Euclidean norms of the first-layer columns, one per input feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupNorms(Vec<f64>);

impl GroupNorms {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Penalty weight of one group in the adaptive penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdaptiveWeight {
    /// Ordinary positive weight `1 / norm^gamma`.
    Value(f64),
    /// The pilot column was (numerically) zero; the group is pinned to zero.
    Frozen,
}

/// Per-feature adaptive penalty weights derived from a pilot estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveWeights {
    weights: Vec<AdaptiveWeight>,
    gamma: f64,
}

impl AdaptiveWeights {
    /// Builds explicit weights; all values must be positive and finite.
    pub fn from_values(values: &[f64], gamma: f64) -> Result<Self> {
        if values.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::Config("adaptive weights must be positive and finite".into()));
        }
        Ok(AdaptiveWeights {
            weights: values.iter().map(|&w| AdaptiveWeight::Value(w)).collect(),
            gamma,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, k: usize) -> AdaptiveWeight {
        self.weights[k]
    }

    pub fn is_frozen(&self, k: usize) -> bool {
        matches!(self.weights[k], AdaptiveWeight::Frozen)
    }

    pub fn n_frozen(&self) -> usize {
        self.weights.iter().filter(|w| matches!(w, AdaptiveWeight::Frozen)).count()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn iter(&self) -> impl Iterator<Item = AdaptiveWeight> + '_ {
        self.weights.iter().copied()
    }
}

/// Default norm below which a pilot column counts as exactly zero.
pub const DEFAULT_FREEZE_TOL: f64 = 1e-12;

/// Penalty attached to a training run.
#[derive(Debug, Clone, PartialEq)]
pub enum PenaltySpec {
    /// Unpenalized empirical-risk minimization.
    None,
    /// Group lasso with strength `lambda`.
    GroupLasso { lambda: f64 },
    /// Adaptive group lasso with strength `zeta` and per-group weights.
    Adaptive { zeta: f64, weights: AdaptiveWeights },
}

impl PenaltySpec {
    pub fn validate(&self, n_inputs: usize) -> Result<()> {
        match self {
            PenaltySpec::None => Ok(()),
            PenaltySpec::GroupLasso { lambda } => {
                if !lambda.is_finite() || *lambda < 0.0 {
                    return Err(Error::Config(format!(
                        "lambda must be finite and non-negative, got {lambda}"
                    )));
                }
                Ok(())
            }
            PenaltySpec::Adaptive { zeta, weights } => {
                if !zeta.is_finite() || *zeta < 0.0 {
                    return Err(Error::Config(format!(
                        "zeta must be finite and non-negative, got {zeta}"
                    )));
                }
                if weights.len() != n_inputs {
                    return Err(Error::DimensionMismatch(format!(
                        "{} adaptive weights for {} features",
                        weights.len(),
                        n_inputs
                    )));
                }
                Ok(())
            }
        }
    }

    /// Penalty value at `params`. Enforces the frozen-group contract for
    /// adaptive penalties.
    pub fn value(&self, params: &NetworkParams) -> Result<f64> {
        match self {
            PenaltySpec::None => Ok(0.0),
            PenaltySpec::GroupLasso { lambda } => Ok(lambda * group_lasso_penalty(params)),
            PenaltySpec::Adaptive { zeta, weights } => {
                Ok(zeta * adaptive_penalty(params, weights)?)
            }
        }
    }
}

/// Per-feature first-layer column norms.
pub fn group_norms(params: &NetworkParams) -> GroupNorms {
    GroupNorms((0..params.n_inputs()).map(|k| params.column_norm(k)).collect())
}

/// Unweighted group-lasso penalty: the sum of first-layer column norms.
pub fn group_lasso_penalty(params: &NetworkParams) -> f64 {
    (0..params.n_inputs()).map(|k| params.column_norm(k)).sum()
}

/// Adaptive weights `1 / norm^gamma` from a pilot fit. Columns with pilot
/// norm at or below `freeze_tol` (or whose weight overflows) come out
/// `Frozen`.
pub fn adaptive_weights(init: &NetworkParams, gamma: f64, freeze_tol: f64) -> Result<AdaptiveWeights> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Config(format!("gamma must be positive and finite, got {gamma}")));
    }
    if !(freeze_tol >= 0.0) {
        return Err(Error::Config(format!("freeze_tol must be non-negative, got {freeze_tol}")));
    }
    let weights = (0..init.n_inputs())
        .map(|k| {
            let norm = init.column_norm(k);
            if norm <= freeze_tol {
                return AdaptiveWeight::Frozen;
            }
            let w = norm.powf(-gamma);
            if w.is_finite() && w > 0.0 {
                AdaptiveWeight::Value(w)
            } else {
                AdaptiveWeight::Frozen
            }
        })
        .collect();
    Ok(AdaptiveWeights { weights, gamma })
}

/// Weighted penalty `sum_k w_k * norm_k` over non-frozen groups.
///
/// Frozen groups must be exactly zero in `params`; a nonzero frozen column
/// is a contract violation (the trainer enforces the pin).
pub fn adaptive_penalty(params: &NetworkParams, weights: &AdaptiveWeights) -> Result<f64> {
    if weights.len() != params.n_inputs() {
        return Err(Error::DimensionMismatch(format!(
            "{} adaptive weights for {} features",
            weights.len(),
            params.n_inputs()
        )));
    }
    let mut total = 0.0;
    for k in 0..params.n_inputs() {
        let norm = params.column_norm(k);
        match weights.get(k) {
            AdaptiveWeight::Value(w) => total += w * norm,
            AdaptiveWeight::Frozen => {
                if norm != 0.0 {
                    return Err(Error::Contract(format!(
                        "frozen group {k} has nonzero norm {norm}"
                    )));
                }
            }
        }
    }
    Ok(total)
}

/// Proximal operator of `t * ||.||` on one group: shrink the vector's norm
/// by `t`, snapping to exact zeros when the norm is at or below `t`.
pub fn block_soft_threshold(column: &[f64], t: f64) -> Vec<f64> {
    assert!(t >= 0.0, "threshold must be non-negative");
    let mut out = column.to_vec();
    soft_threshold_strided(&mut out, 0, 1, column.len(), t);
    out
}

/// In-place block soft threshold over a strided group inside a flat buffer
/// (entries `offset`, `offset+stride`, ...).
pub(crate) fn soft_threshold_strided(buf: &mut [f64], offset: usize, stride: usize, len: usize, t: f64) {
    let mut sq = 0.0;
    for j in 0..len {
        let v = buf[offset + j * stride];
        sq += v * v;
    }
    let norm = sq.sqrt();
    if norm <= t {
        for j in 0..len {
            buf[offset + j * stride] = 0.0;
        }
    } else {
        let scale = 1.0 - t / norm;
        for j in 0..len {
            buf[offset + j * stride] *= scale;
        }
    }
}
