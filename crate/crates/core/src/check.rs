//! Numerical gradient checking.
//!
//! Central finite differences over the flat parameter vector, built purely
//! on risk evaluations so it stays independent of the backpropagation path.

use crate::error::Result;
use crate::net::{empirical_risk, Dataset, LossKind, NetworkParams};

/// Central-difference approximation of the empirical-risk gradient.
///
/// Each coordinate is perturbed by ±`step` in the flat layout and the risk
/// difference quotient recorded. `step` around 1e-5 balances truncation and
/// round-off error for parameters of order one.
pub fn finite_difference_grad(
    params: &NetworkParams,
    data: &Dataset,
    loss: LossKind,
    step: f64,
) -> Result<Vec<f64>> {
    let mut theta = params.to_flat();
    let mut grad = vec![0.0; theta.len()];
    for j in 0..theta.len() {
        let orig = theta[j];
        theta[j] = orig + step;
        let plus = empirical_risk(
            &NetworkParams::from_flat(params.n_hidden(), params.n_inputs(), &theta)?,
            data,
            loss,
        )?;
        theta[j] = orig - step;
        let minus = empirical_risk(
            &NetworkParams::from_flat(params.n_hidden(), params.n_inputs(), &theta)?,
            data,
            loss,
        )?;
        theta[j] = orig;
        grad[j] = (plus - minus) / (2.0 * step);
    }
    Ok(grad)
}

/// Largest mixed absolute/relative gap between two gradient vectors:
/// `|a - b| / max(1, |a|, |b|)` per coordinate, maximized.
pub fn max_mixed_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}
