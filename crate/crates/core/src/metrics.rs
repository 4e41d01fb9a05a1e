//! Selection metrics and the report structure experiments produce.
//!
//! FDR here is per-feature: for a truly non-significant feature it is the
//! fraction of replications that (wrongly) selected it. TPR is the mirror
//! image for significant features. Replications whose fit failed are
//! recorded with an error message and excluded from both numerator and
//! denominator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{forward, sigmoid, Dataset, LossKind, Task};
use crate::optim::TrainConfig;
use crate::pipeline::{fit_erm, Method};
use crate::seed::{derive_seed, TAG_SPLIT, TAG_VALIDATION_FIT};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// One replication of one method at one noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCell {
    pub sigma2: f64,
    pub method: Method,
    pub replication: usize,
    pub true_support: Vec<bool>,
    /// Selected mask, or `None` when the fit failed.
    pub selected: Option<Vec<bool>>,
    pub error: Option<String>,
}

/// All cells of a simulation experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub cells: Vec<ExperimentCell>,
}

impl ExperimentReport {
    /// Distinct noise levels, in order of first appearance.
    pub fn sigma2_values(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for cell in &self.cells {
            if !out.iter().any(|&s| s == cell.sigma2) {
                out.push(cell.sigma2);
            }
        }
        out
    }

    /// Distinct methods, in order of first appearance.
    pub fn methods(&self) -> Vec<Method> {
        let mut out: Vec<Method> = Vec::new();
        for cell in &self.cells {
            if !out.contains(&cell.method) {
                out.push(cell.method);
            }
        }
        out
    }

    fn successful_cells(&self, sigma2: f64, method: Method) -> Result<Vec<&ExperimentCell>> {
        let cells: Vec<&ExperimentCell> = self
            .cells
            .iter()
            .filter(|c| c.sigma2 == sigma2 && c.method == method && c.selected.is_some())
            .collect();
        if cells.is_empty() {
            return Err(Error::EmptyCell { sigma2, method: method.to_string() });
        }
        let support = &cells[0].true_support;
        if cells.iter().any(|c| &c.true_support != support) {
            return Err(Error::Contract(
                "replications disagree on the true support layout".into(),
            ));
        }
        Ok(cells)
    }

    fn selection_frequency(
        &self,
        sigma2: f64,
        method: Method,
        want_significant: bool,
    ) -> Result<Vec<(usize, f64)>> {
        let cells = self.successful_cells(sigma2, method)?;
        let support = &cells[0].true_support;
        let mut out = Vec::new();
        for (k, &sig) in support.iter().enumerate() {
            if sig != want_significant {
                continue;
            }
            let hits = cells
                .iter()
                .filter(|c| c.selected.as_ref().map(|m| m[k]).unwrap_or(false))
                .count();
            out.push((k, hits as f64 / cells.len() as f64));
        }
        Ok(out)
    }
}

/// Selection frequency of each truly non-significant feature, as
/// `(feature index, frequency)` pairs. Errors if the (sigma2, method) cell
/// has no successful replications.
pub fn fdr_per_feature(
    report: &ExperimentReport,
    sigma2: f64,
    method: Method,
) -> Result<Vec<(usize, f64)>> {
    report.selection_frequency(sigma2, method, false)
}

/// Selection frequency of each truly significant feature.
pub fn tpr_per_feature(
    report: &ExperimentReport,
    sigma2: f64,
    method: Method,
) -> Result<Vec<(usize, f64)>> {
    report.selection_frequency(sigma2, method, true)
}

/// Fraction of agreeing entries between predictions and truth.
pub fn accuracy(predictions: &[bool], truth: &[bool]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Config("accuracy of an empty prediction set".into()));
    }
    let hits = predictions.iter().zip(truth.iter()).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / predictions.len() as f64)
}

fn predict_class(params: &crate::net::NetworkParams, x: &[f64], loss: LossKind) -> Result<bool> {
    let f = forward(params, x)?;
    Ok(match loss {
        // class-1 probability >= 1/2 iff the logit is non-negative
        LossKind::BinaryCrossEntropy => sigmoid(f) >= 0.5,
        // squared-loss fits regress on {0,1}; threshold the raw output
        LossKind::Squared => f >= 0.5,
    })
}

/// Compares held-out accuracy of unpenalized fits on all features versus
/// on the selected features only.
///
/// Each repeat draws a fresh seeded 75/25 split, fits one network on the
/// full training features and one on the masked training features (same
/// fit seed, so an all-true mask reproduces identical accuracies), and
/// scores both on the held-out quarter. Returns the two mean accuracies
/// `(full, selected)`.
pub fn validation_study(
    data: &Dataset,
    selected: &[bool],
    cfg: &TrainConfig,
    repeats: usize,
) -> Result<(f64, f64)> {
    if data.task() != Task::Binary {
        return Err(Error::Contract("validation study requires a binary task".into()));
    }
    if selected.len() != data.n_inputs() {
        return Err(Error::DimensionMismatch(format!(
            "mask has {} entries for {} features",
            selected.len(),
            data.n_inputs()
        )));
    }
    if repeats == 0 {
        return Err(Error::Config("validation study needs at least one repeat".into()));
    }
    let n = data.len();
    if n < 4 {
        return Err(Error::Config("validation study needs at least 4 samples".into()));
    }
    let masked_all = data.select_columns(selected)?;

    let accs: Vec<Result<(f64, f64)>> = (0..repeats as u64)
        .into_par_iter()
        .map(|r| {
            let mut order: Vec<usize> = (0..n).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, TAG_SPLIT, r));
            order.shuffle(&mut rng);
            let cut = n * 3 / 4;
            let (train_idx, test_idx) = order.split_at(cut);

            let mut fit_cfg = cfg.clone();
            fit_cfg.seed = derive_seed(cfg.seed, TAG_VALIDATION_FIT, r);

            let truth: Vec<bool> = test_idx.iter().map(|&i| data.target(i) == 1.0).collect();

            let (full_fit, _) = fit_erm(&data.subset(train_idx)?, &fit_cfg)?;
            let full_pred: Vec<bool> = test_idx
                .iter()
                .map(|&i| predict_class(&full_fit, data.row(i), cfg.loss))
                .collect::<Result<_>>()?;

            let (masked_fit, _) = fit_erm(&masked_all.subset(train_idx)?, &fit_cfg)?;
            let masked_pred: Vec<bool> = test_idx
                .iter()
                .map(|&i| predict_class(&masked_fit, masked_all.row(i), cfg.loss))
                .collect::<Result<_>>()?;

            Ok((accuracy(&full_pred, &truth)?, accuracy(&masked_pred, &truth)?))
        })
        .collect();

    let mut full_total = 0.0;
    let mut masked_total = 0.0;
    for acc in accs {
        let (f, m) = acc?;
        full_total += f;
        masked_total += m;
    }
    Ok((full_total / repeats as f64, masked_total / repeats as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn cell(
        sigma2: f64,
        method: Method,
        replication: usize,
        selected: Option<Vec<bool>>,
    ) -> ExperimentCell {
        ExperimentCell {
            sigma2,
            method,
            replication,
            true_support: vec![true, false],
            selected,
            error: None,
        }
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[true, false], &[true, false]).unwrap(), 1.0);
        assert_eq!(accuracy(&[true, false], &[false, true]).unwrap(), 0.0);
        assert_eq!(accuracy(&[true, true], &[true, false]).unwrap(), 0.5);
        assert!(accuracy(&[true], &[true, false]).is_err());
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn fdr_and_tpr_are_selection_frequencies() {
        let report = ExperimentReport {
            cells: vec![
                cell(0.4, Method::GlAgl, 0, Some(vec![true, true])),
                cell(0.4, Method::GlAgl, 1, Some(vec![true, false])),
                cell(0.4, Method::GlAgl, 2, Some(vec![false, false])),
            ],
        };
        let fdr = fdr_per_feature(&report, 0.4, Method::GlAgl).unwrap();
        assert_eq!(fdr, vec![(1, 1.0 / 3.0)]);
        let tpr = tpr_per_feature(&report, 0.4, Method::GlAgl).unwrap();
        assert_eq!(tpr, vec![(0, 2.0 / 3.0)]);
    }

    #[test]
    fn failed_replications_are_excluded() {
        let mut failed = cell(0.4, Method::GlAgl, 2, None);
        failed.error = Some("diverged".into());
        let report = ExperimentReport {
            cells: vec![
                cell(0.4, Method::GlAgl, 0, Some(vec![true, true])),
                cell(0.4, Method::GlAgl, 1, Some(vec![true, false])),
                failed,
            ],
        };
        let fdr = fdr_per_feature(&report, 0.4, Method::GlAgl).unwrap();
        assert_eq!(fdr, vec![(1, 0.5)]);
    }

    #[test]
    fn missing_cell_is_an_error() {
        let report = ExperimentReport {
            cells: vec![cell(0.4, Method::GlAgl, 0, Some(vec![true, false]))],
        };
        assert!(matches!(
            fdr_per_feature(&report, 0.8, Method::GlAgl),
            Err(Error::EmptyCell { .. })
        ));
        assert!(matches!(
            fdr_per_feature(&report, 0.4, Method::GroupLasso),
            Err(Error::EmptyCell { .. })
        ));
    }

    #[test]
    fn report_enumerations_keep_first_appearance_order() {
        let report = ExperimentReport {
            cells: vec![
                cell(0.4, Method::GlAgl, 0, Some(vec![true, false])),
                cell(0.0, Method::GroupLasso, 0, Some(vec![true, false])),
                cell(0.4, Method::GroupLasso, 1, Some(vec![true, false])),
            ],
        };
        assert_eq!(report.sigma2_values(), vec![0.4, 0.0]);
        assert_eq!(report.methods(), vec![Method::GlAgl, Method::GroupLasso]);
    }

    fn binary_data(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs: Vec<f64> =
            (0..n * 3).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let targets: Vec<f64> =
            (0..n).map(|i| if inputs[i * 3] + 0.5 * inputs[i * 3 + 1] > 0.0 { 1.0 } else { 0.0 }).collect();
        Dataset::from_flat(inputs, 3, targets, Task::Binary).unwrap()
    }

    fn study_cfg(seed: u64) -> TrainConfig {
        TrainConfig {
            n_hidden: 3,
            epochs: 150,
            batch_size: 32,
            loss: LossKind::BinaryCrossEntropy,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn all_true_mask_gives_identical_accuracies() {
        let data = binary_data(80, 70);
        let (full, masked) =
            validation_study(&data, &[true, true, true], &study_cfg(1), 3).unwrap();
        assert_eq!(full, masked);
    }

    #[test]
    fn validation_study_is_deterministic_and_bounded() {
        let data = binary_data(80, 71);
        let mask = [true, true, false];
        let a = validation_study(&data, &mask, &study_cfg(2), 4).unwrap();
        let b = validation_study(&data, &mask, &study_cfg(2), 4).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a.0));
        assert!((0.0..=1.0).contains(&a.1));
    }

    #[test]
    fn dropping_the_informative_features_hurts() {
        let data = binary_data(120, 72);
        // keep only the uninformative third column
        let (full, masked) =
            validation_study(&data, &[false, false, true], &study_cfg(3), 4).unwrap();
        assert!(full > masked, "full {full} <= masked {masked}");
    }

    #[test]
    fn validation_study_rejects_regression_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let inputs: Vec<f64> = (0..40).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let targets: Vec<f64> = (0..40).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let data = Dataset::from_flat(inputs, 1, targets, Task::Regression).unwrap();
        assert!(validation_study(&data, &[true], &study_cfg(4), 2).is_err());
    }
}
