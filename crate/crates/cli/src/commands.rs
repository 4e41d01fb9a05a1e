//! The seven commands and their result documents.
//!
//! Every command echoes its resolved configuration to stdout, embeds the
//! same configuration in its result file, and never modifies an input
//! file. JSON carries structured results; CSV carries tabular aggregates.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use aglnet::metrics::{fdr_per_feature, tpr_per_feature, validation_study};
use aglnet::penalty::group_norms;
use aglnet::pipeline::{run_pipeline, select_features, stability_run};
use aglnet::simgen::run_experiment;
use aglnet::{CvEntry, ExperimentReport, GroupNorms, Method, NetworkParams, SelectionResult, Task};

use crate::config::ResolvedConfig;
use crate::data::{feature_names, load_table};
use crate::error::{io_error, CliError, Result};

// ------------------------------------------------------------- documents

#[derive(Serialize)]
pub struct FitDoc {
    pub config: ResolvedConfig,
    pub result: SelectionResult,
}

#[derive(Serialize)]
pub struct CvDoc {
    pub config: ResolvedConfig,
    pub method: Method,
    pub chosen_lambda: f64,
    pub chosen_zeta: Option<f64>,
    pub cv_lambda: Vec<CvEntry>,
    pub cv_zeta: Vec<CvEntry>,
}

#[derive(Serialize)]
pub struct SelectDoc {
    pub config: ResolvedConfig,
    pub cutoff: f64,
    pub norms: GroupNorms,
    pub selected: Vec<bool>,
}

#[derive(Serialize)]
pub struct FeatureFrequency {
    pub feature: usize,
    pub name: String,
    pub frequency: f64,
}

#[derive(Serialize)]
pub struct StabilityDoc {
    pub config: ResolvedConfig,
    pub method: Method,
    pub repeats: usize,
    pub features: Vec<FeatureFrequency>,
}

#[derive(Serialize)]
pub struct ValidateDoc {
    pub config: ResolvedConfig,
    pub repeats: usize,
    pub mask: Vec<bool>,
    pub accuracy_full: f64,
    pub accuracy_selected: f64,
}

#[derive(Serialize)]
pub struct SimulateDoc {
    pub config: ResolvedConfig,
    pub report: ExperimentReport,
}

// Lenient input shapes for documents other commands saved.
#[derive(Deserialize)]
struct SavedFit {
    result: SavedFitResult,
}

#[derive(Deserialize)]
struct SavedFitResult {
    fitted: NetworkParams,
    selected: Option<Vec<bool>>,
}

#[derive(Deserialize)]
struct SavedMask {
    selected: Vec<bool>,
}

#[derive(Deserialize)]
struct SavedReport {
    report: ExperimentReport,
}

// -------------------------------------------------------------- commands

pub fn simulate(cfg: &ResolvedConfig) -> Result<()> {
    let sim = cfg
        .sim
        .clone()
        .ok_or_else(|| CliError::Usage("simulate needs a `sim` section in the config".into()))?;
    let report = run_experiment(&sim, &cfg.methods, &cfg.grids, &cfg.pipeline_config())?;
    let failed = report.cells.iter().filter(|c| c.error.is_some()).count();
    if failed > 0 {
        log::warn!("{failed} of {} fits failed; their cells carry the message", report.cells.len());
    }
    write_json(&cfg.output, &SimulateDoc { config: cfg.clone(), report: report.clone() })?;
    write_rate_tables(&report, &cfg.output)
}

pub fn fit(cfg: &ResolvedConfig) -> Result<()> {
    let table = load_table(require_data(cfg, "fit")?, cfg.task)?;
    let result = run_pipeline(&table.dataset, cfg.method, &cfg.grids, &cfg.pipeline_config())?;
    log::info!(
        "{}: selected {} of {} features",
        cfg.method,
        result.selected.iter().filter(|&&s| s).count(),
        result.selected.len()
    );
    write_json(&cfg.output, &FitDoc { config: cfg.clone(), result })
}

pub fn cv(cfg: &ResolvedConfig) -> Result<()> {
    let table = load_table(require_data(cfg, "cv")?, cfg.task)?;
    let result = run_pipeline(&table.dataset, cfg.method, &cfg.grids, &cfg.pipeline_config())?;
    write_json(
        &cfg.output,
        &CvDoc {
            config: cfg.clone(),
            method: result.method,
            chosen_lambda: result.chosen_lambda,
            chosen_zeta: result.chosen_zeta,
            cv_lambda: result.cv_lambda,
            cv_zeta: result.cv_zeta,
        },
    )
}

pub fn select(cfg: &ResolvedConfig, input: &Path) -> Result<()> {
    let text = std::fs::read_to_string(input).map_err(|e| io_error("read", input, e))?;
    let fitted = extract_fitted(&text, input)?;
    let norms = group_norms(&fitted);
    let selected = select_features(&fitted, cfg.cutoff);
    write_json(
        &cfg.output,
        &SelectDoc { config: cfg.clone(), cutoff: cfg.cutoff, norms, selected },
    )
}

pub fn stability(cfg: &ResolvedConfig) -> Result<()> {
    let table = load_table(require_data(cfg, "stability")?, cfg.task)?;
    let frequencies = stability_run(
        &table.dataset,
        cfg.method,
        &cfg.grids,
        &cfg.pipeline_config(),
        cfg.repeats,
    )?;
    let names = feature_names(
        cfg.feature_names.as_deref(),
        table.header.as_deref(),
        table.dataset.n_inputs(),
    )?;
    let features: Vec<FeatureFrequency> = frequencies
        .iter()
        .zip(names)
        .enumerate()
        .map(|(feature, (&frequency, name))| FeatureFrequency { feature, name, frequency })
        .collect();

    let mut csv = csv::Writer::from_writer(Vec::new());
    csv_record(&mut csv, ["feature", "name", "frequency"])?;
    for f in &features {
        csv_record(&mut csv, [f.feature.to_string(), f.name.clone(), f.frequency.to_string()])?;
    }
    write_bytes(&sibling(&cfg.output, "_frequencies", "csv"), &csv_bytes(csv)?)?;

    write_json(
        &cfg.output,
        &StabilityDoc { config: cfg.clone(), method: cfg.method, repeats: cfg.repeats, features },
    )
}

pub fn validate(cfg: &ResolvedConfig, mask_path: &Path) -> Result<()> {
    if cfg.task != Task::Binary {
        return Err(CliError::Usage("validate requires a binary task".into()));
    }
    let table = load_table(require_data(cfg, "validate")?, cfg.task)?;
    let text = std::fs::read_to_string(mask_path).map_err(|e| io_error("read", mask_path, e))?;
    let mask = extract_mask(&text, mask_path)?;
    let (accuracy_full, accuracy_selected) =
        validation_study(&table.dataset, &mask, &cfg.train, cfg.repeats)?;
    log::info!("mean accuracy: full {accuracy_full:.4}, selected {accuracy_selected:.4}");
    write_json(
        &cfg.output,
        &ValidateDoc {
            config: cfg.clone(),
            repeats: cfg.repeats,
            mask,
            accuracy_full,
            accuracy_selected,
        },
    )
}

pub fn report(cfg: &ResolvedConfig, input: &Path) -> Result<()> {
    let text = std::fs::read_to_string(input).map_err(|e| io_error("read", input, e))?;
    let saved: SavedReport = serde_json::from_str(&text).map_err(|e| {
        CliError::Usage(format!("{}: not a saved simulation result: {e}", input.display()))
    })?;
    write_rate_tables(&saved.report, &cfg.output)
}

// --------------------------------------------------------------- helpers

fn require_data<'c>(
    cfg: &'c ResolvedConfig,
    command: &str,
) -> Result<&'c crate::config::ResolvedData> {
    cfg.data.as_ref().ok_or_else(|| {
        CliError::Usage(format!("{command} needs a data file (--data or `data.path` in the config)"))
    })
}

fn extract_fitted(text: &str, path: &Path) -> Result<NetworkParams> {
    if let Ok(doc) = serde_json::from_str::<SavedFit>(text) {
        return Ok(doc.result.fitted);
    }
    serde_json::from_str::<NetworkParams>(text).map_err(|_| {
        CliError::Usage(format!(
            "{}: neither a saved fit nor bare network parameters",
            path.display()
        ))
    })
}

fn extract_mask(text: &str, path: &Path) -> Result<Vec<bool>> {
    if let Ok(doc) = serde_json::from_str::<SavedMask>(text) {
        return Ok(doc.selected);
    }
    if let Ok(doc) = serde_json::from_str::<SavedFit>(text) {
        if let Some(selected) = doc.result.selected {
            return Ok(selected);
        }
    }
    Err(CliError::Usage(format!(
        "{}: no `selected` mask found (expected a select or fit result)",
        path.display()
    )))
}

/// FDR table over non-significant features and TPR table over significant
/// ones, written next to `out` as `<stem>_fdr.csv` and `<stem>_tpr.csv`.
fn write_rate_tables(report: &ExperimentReport, out: &Path) -> Result<()> {
    for (suffix, label, rate) in [
        ("_fdr", "fdr", fdr_per_feature as RateFn),
        ("_tpr", "tpr", tpr_per_feature as RateFn),
    ] {
        let mut csv = csv::Writer::from_writer(Vec::new());
        csv_record(&mut csv, ["sigma2", "method", "feature", label])?;
        for sigma2 in report.sigma2_values() {
            for method in report.methods() {
                for (feature, value) in rate(report, sigma2, method)? {
                    csv_record(
                        &mut csv,
                        [
                            sigma2.to_string(),
                            method.to_string(),
                            feature.to_string(),
                            value.to_string(),
                        ],
                    )?;
                }
            }
        }
        write_bytes(&sibling(out, suffix, "csv"), &csv_bytes(csv)?)?;
    }
    Ok(())
}

type RateFn = fn(&ExperimentReport, f64, Method) -> aglnet::Result<Vec<(usize, f64)>>;

/// `foo/bar.json` with suffix `_fdr` and extension `csv` becomes
/// `foo/bar_fdr.csv`.
fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    let name = format!("{stem}{suffix}.{ext}");
    match path.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent.join(name),
        _ => PathBuf::from(name),
    }
}

fn write_json<T: Serialize>(path: &Path, doc: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc)
        .map_err(|e| CliError::Usage(format!("cannot serialize result: {e}")))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| io_error("create", parent, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| io_error("write", path, e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn csv_record<W, I, S>(writer: &mut csv::Writer<W>, record: I) -> Result<()>
where
    W: std::io::Write,
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    writer
        .write_record(record)
        .map_err(|e| CliError::Usage(format!("cannot write table: {e}")))
}

fn csv_bytes(writer: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    writer
        .into_inner()
        .map_err(|e| CliError::Usage(format!("cannot finish table: {e}")))
}
