//! Run configuration: JSON config file, flag overrides, and resolution to
//! the concrete settings a command runs with.
//!
//! Precedence is defaults < config file < command-line flags. Defaults for
//! the loss, batch size, and hyperparameter grid follow the task:
//! regression uses the squared loss, batches of 200, and the grid
//! {0.001, 0.01, 0.1, 1}; binary classification uses the cross-entropy
//! loss, batches of 32, and the grid {0.001, 0.01, 0.1, 1, 2, 4, 8, 16}.
//! The resolved configuration is echoed to stdout and embedded in every
//! result file, so a run can be reproduced from its output alone.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use aglnet::{Grids, LossKind, Method, PipelineConfig, SimConfig, Task, TrainConfig, TrainMode};

use crate::error::{io_error, CliError, Result};

pub const REGRESSION_GRID: [f64; 4] = [0.001, 0.01, 0.1, 1.0];
pub const CLASSIFICATION_GRID: [f64; 8] = [0.001, 0.01, 0.1, 1.0, 2.0, 4.0, 8.0, 16.0];
pub const REGRESSION_BATCH: usize = 200;
pub const CLASSIFICATION_BATCH: usize = 32;
pub const DEFAULT_REPEATS: usize = 100;

/// The config file schema. Every field is optional; unknown keys are
/// rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub task: Option<Task>,
    pub method: Option<Method>,
    /// Methods the `simulate` command sweeps; defaults to all three.
    pub methods: Option<Vec<Method>>,
    pub train: Option<TrainSection>,
    pub grids: Option<GridsSection>,
    pub cutoff: Option<f64>,
    pub gamma: Option<f64>,
    pub cv_folds: Option<usize>,
    pub freeze_tol: Option<f64>,
    pub sim: Option<SimSection>,
    pub data: Option<DataSection>,
    /// Repeats for `stability` and `validate`.
    pub repeats: Option<usize>,
    /// Optional file with one feature name per line.
    pub feature_names: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub n_hidden: Option<usize>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub mode: Option<TrainMode>,
    pub loss: Option<LossKind>,
    pub seed: Option<u64>,
    pub init_scale: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridsSection {
    pub lambda: Option<Vec<f64>>,
    pub zeta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub n_significant: usize,
    pub n_noise: usize,
    /// Hidden width of the true and fitted networks; defaults to the
    /// training width.
    pub n_hidden: Option<usize>,
    pub n_samples: usize,
    pub sigma2_list: Vec<f64>,
    pub repeats: usize,
    /// Base seed of the experiment; defaults to the training seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    pub delimiter: Option<char>,
    /// `None` auto-detects: the first row is a header iff any of its cells
    /// fails to parse as a number.
    pub has_header: Option<bool>,
    /// Zero-based target column; defaults to the last column.
    pub target_column: Option<usize>,
}

/// Global flag overrides, applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub delimiter: Option<char>,
    pub cutoff: Option<f64>,
    pub gamma: Option<f64>,
    pub epochs: Option<usize>,
    pub mode: Option<TrainMode>,
    pub method: Option<Method>,
    pub task: Option<Task>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub repeats: Option<usize>,
    pub feature_names: Option<PathBuf>,
}

/// Fully-resolved data source.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedData {
    pub path: PathBuf,
    pub delimiter: char,
    pub has_header: Option<bool>,
    pub target_column: Option<usize>,
}

/// Everything a command runs with; echoed to stdout and embedded in the
/// result file.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub command: String,
    pub task: Task,
    pub method: Method,
    pub methods: Vec<Method>,
    pub train: TrainConfig,
    pub grids: Grids,
    pub cutoff: f64,
    pub gamma: f64,
    pub cv_folds: usize,
    pub freeze_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<ResolvedData>,
    pub repeats: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_names: Option<PathBuf>,
    pub output: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

impl ResolvedConfig {
    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            train: self.train.clone(),
            gamma: self.gamma,
            cutoff: self.cutoff,
            cv_folds: self.cv_folds,
            freeze_tol: self.freeze_tol,
        }
    }
}

/// Reads and parses the config file; a missing `--config` yields the empty
/// config (all defaults).
pub fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| io_error("read config", path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
}

/// Merges defaults, the config file, and flag overrides into the concrete
/// settings for `command`, validating everything the command will use.
pub fn resolve(
    command: &str,
    file: &FileConfig,
    flags: &Overrides,
) -> Result<ResolvedConfig> {
    let task = flags.task.or(file.task).unwrap_or(Task::Regression);
    let (default_loss, default_batch, default_grid): (LossKind, usize, &[f64]) = match task {
        Task::Regression => (LossKind::Squared, REGRESSION_BATCH, &REGRESSION_GRID),
        Task::Binary => {
            (LossKind::BinaryCrossEntropy, CLASSIFICATION_BATCH, &CLASSIFICATION_GRID)
        }
    };

    let ts = file.train.clone().unwrap_or_default();
    let defaults = TrainConfig::default();
    let mut train = TrainConfig {
        n_hidden: ts.n_hidden.unwrap_or(defaults.n_hidden),
        epochs: flags.epochs.or(ts.epochs).unwrap_or(defaults.epochs),
        batch_size: ts.batch_size.unwrap_or(default_batch),
        learning_rate: ts.learning_rate.unwrap_or(defaults.learning_rate),
        mode: flags.mode.or(ts.mode).unwrap_or(defaults.mode),
        loss: ts.loss.unwrap_or(default_loss),
        seed: flags.seed.or(ts.seed).unwrap_or(defaults.seed),
        init_scale: ts.init_scale.unwrap_or(defaults.init_scale),
    };

    let gs = file.grids.clone().unwrap_or_default();
    let grids = Grids {
        lambda: gs.lambda.unwrap_or_else(|| default_grid.to_vec()),
        zeta: gs.zeta,
    };

    let sim = match &file.sim {
        Some(s) => {
            let sim = SimConfig {
                n_significant: s.n_significant,
                n_noise: s.n_noise,
                n_hidden: s.n_hidden.unwrap_or(train.n_hidden),
                n_samples: s.n_samples,
                sigma2_list: s.sigma2_list.clone(),
                repeats: s.repeats,
                seed: flags.seed.or(s.seed).unwrap_or(train.seed),
            };
            sim.validate()?;
            // the experiment drives the fitted width; keep the echo honest
            // without letting a leftover sim block change what `fit` or `cv`
            // train on a real data file
            if command == "simulate" {
                train.n_hidden = sim.n_hidden;
            }
            Some(sim)
        }
        None => None,
    };

    let data = match (&flags.data, &file.data) {
        (Some(path), Some(section)) => Some(ResolvedData {
            path: path.clone(),
            delimiter: flags.delimiter.or(section.delimiter).unwrap_or(','),
            has_header: section.has_header,
            target_column: section.target_column,
        }),
        (Some(path), None) => Some(ResolvedData {
            path: path.clone(),
            delimiter: flags.delimiter.unwrap_or(','),
            has_header: None,
            target_column: None,
        }),
        (None, Some(section)) => Some(ResolvedData {
            path: section.path.clone(),
            delimiter: flags.delimiter.or(section.delimiter).unwrap_or(','),
            has_header: section.has_header,
            target_column: section.target_column,
        }),
        (None, None) => None,
    };

    let output = flags
        .out
        .clone()
        .or_else(|| file.output.clone())
        .unwrap_or_else(|| default_output(command));

    let resolved = ResolvedConfig {
        command: command.to_string(),
        task,
        method: flags.method.or(file.method).unwrap_or(Method::GlAgl),
        methods: file
            .methods
            .clone()
            .unwrap_or_else(|| vec![Method::GroupLasso, Method::ErmAgl, Method::GlAgl]),
        train,
        grids,
        cutoff: flags.cutoff.or(file.cutoff).unwrap_or(aglnet::pipeline::DEFAULT_CUTOFF),
        gamma: flags.gamma.or(file.gamma).unwrap_or(aglnet::pipeline::DEFAULT_GAMMA),
        cv_folds: file.cv_folds.unwrap_or(aglnet::pipeline::DEFAULT_CV_FOLDS),
        freeze_tol: file.freeze_tol.unwrap_or(aglnet::penalty::DEFAULT_FREEZE_TOL),
        sim,
        data,
        repeats: flags.repeats.or(file.repeats).unwrap_or(DEFAULT_REPEATS),
        feature_names: flags.feature_names.clone().or_else(|| file.feature_names.clone()),
        output,
        jobs: flags.jobs.or(file.jobs),
    };

    resolved.pipeline_config().validate()?;
    resolved.grids.validate()?;
    if resolved.methods.is_empty() {
        return Err(CliError::Usage("methods must not be empty".into()));
    }
    if resolved.repeats == 0 {
        return Err(CliError::Usage("repeats must be at least 1".into()));
    }
    if resolved.train.loss == LossKind::BinaryCrossEntropy && resolved.task != Task::Binary {
        return Err(CliError::Usage(
            "the cross-entropy loss requires a binary task".into(),
        ));
    }
    Ok(resolved)
}

fn default_output(command: &str) -> PathBuf {
    match command {
        // report writes CSV tables; the path is a stem
        "report" => PathBuf::from("aglnet_report"),
        other => PathBuf::from(format!("aglnet_{other}.json")),
    }
}
