//! `aglnet` — feature selection for one-hidden-layer tanh networks.
//!
//! Subcommands wrap the library pipelines: `simulate` sweeps synthetic
//! experiments, `fit`/`cv`/`select` run a single dataset end to end,
//! `stability` refits one dataset under different seeds, `validate`
//! compares held-out accuracy with and without the selection, and
//! `report` re-renders a saved simulation into CSV tables.
//!
//! Exit codes: 0 on success, 1 for usage/configuration/input problems,
//! 2 for numerical failures during a run.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use aglnet::{Method, Task, TrainMode};

use crate::config::{load_file_config, resolve, Overrides, ResolvedConfig};
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "aglnet",
    version,
    about = "Consistent feature selection for one-hidden-layer tanh networks"
)]
struct Cli {
    /// JSON config file; command-line flags override its values
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Seed for every stage (overrides all seeds in the config)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel replications (default: one per core)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Field delimiter for data files
    #[arg(long, global = true)]
    delimiter: Option<char>,

    /// Selection cutoff on first-layer group norms
    #[arg(long, global = true)]
    cutoff: Option<f64>,

    /// Exponent on inverse pilot norms in the adaptive weights
    #[arg(long, global = true)]
    gamma: Option<f64>,

    /// Training epochs
    #[arg(long, global = true)]
    epochs: Option<usize>,

    /// How the penalty enters training
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a synthetic selection experiment and write its report
    Simulate {
        /// Result file (default aglnet_simulate.json); FDR/TPR tables land
        /// next to it
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit one dataset with the configured method and save the selection
    Fit {
        #[command(flatten)]
        single: SingleDatasetArgs,
    },
    /// Cross-validate the hyperparameter grids on one dataset
    Cv {
        #[command(flatten)]
        single: SingleDatasetArgs,
    },
    /// Threshold a saved fit into a feature mask
    Select {
        /// A fit result file (or bare network parameters as JSON)
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refit one dataset repeatedly and report selection frequencies
    Stability {
        #[command(flatten)]
        single: SingleDatasetArgs,
        /// Number of refits
        #[arg(long)]
        repeats: Option<usize>,
        /// File with one feature name per line
        #[arg(long)]
        names: Option<PathBuf>,
    },
    /// Compare held-out accuracy of full and selected-feature models
    Validate {
        /// Data file (binary targets in the last column)
        #[arg(long)]
        data: Option<PathBuf>,
        /// A select or fit result carrying the feature mask
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render a saved simulation result into CSV tables
    Report {
        /// A simulate result file
        #[arg(long)]
        input: PathBuf,
        /// Output stem; tables land at <stem>_fdr.csv and <stem>_tpr.csv
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, clap::Args)]
struct SingleDatasetArgs {
    /// Data file (features plus target column)
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Selection method
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Target kind
    #[arg(long, value_enum)]
    task: Option<TaskArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Subgradient,
    Proximal,
}

impl From<ModeArg> for TrainMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Subgradient => TrainMode::Subgradient,
            ModeArg::Proximal => TrainMode::Proximal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TaskArg {
    Regression,
    Binary,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Regression => Task::Regression,
            TaskArg::Binary => Task::Binary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    GroupLasso,
    ErmAgl,
    GlAgl,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::GroupLasso => Method::GroupLasso,
            MethodArg::ErmAgl => Method::ErmAgl,
            MethodArg::GlAgl => Method::GlAgl,
        }
    }
}

/// Parses `argv` and runs the selected command, returning the process exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::from_default_env().try_init();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

enum Action {
    Simulate,
    Fit,
    Cv,
    Select { input: PathBuf },
    Stability,
    Validate { mask: PathBuf },
    Report { input: PathBuf },
}

impl Action {
    fn name(&self) -> &'static str {
        match self {
            Action::Simulate => "simulate",
            Action::Fit => "fit",
            Action::Cv => "cv",
            Action::Select { .. } => "select",
            Action::Stability => "stability",
            Action::Validate { .. } => "validate",
            Action::Report { .. } => "report",
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let mut flags = Overrides {
        seed: cli.seed,
        jobs: cli.jobs,
        delimiter: cli.delimiter,
        cutoff: cli.cutoff,
        gamma: cli.gamma,
        epochs: cli.epochs,
        mode: cli.mode.map(TrainMode::from),
        ..Overrides::default()
    };

    let action = match cli.command {
        Command::Simulate { out } => {
            flags.out = out;
            Action::Simulate
        }
        Command::Fit { single } => {
            apply_single(&mut flags, single);
            Action::Fit
        }
        Command::Cv { single } => {
            apply_single(&mut flags, single);
            Action::Cv
        }
        Command::Select { input, out } => {
            flags.out = out;
            Action::Select { input }
        }
        Command::Stability { single, repeats, names } => {
            apply_single(&mut flags, single);
            flags.repeats = repeats;
            flags.feature_names = names;
            Action::Stability
        }
        Command::Validate { data, mask, repeats, out } => {
            flags.data = data;
            flags.repeats = repeats;
            flags.out = out;
            // accuracy comparison is only defined for classification
            flags.task = Some(Task::Binary);
            Action::Validate { mask }
        }
        Command::Report { input, out } => {
            flags.out = out;
            Action::Report { input }
        }
    };

    let file_cfg = load_file_config(cli.config.as_deref())?;
    let resolved = resolve(action.name(), &file_cfg, &flags)?;
    echo_config(&resolved)?;

    match resolved.jobs {
        Some(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot build a {jobs}-thread pool: {e}")))?;
            pool.install(|| dispatch(&action, &resolved))
        }
        None => dispatch(&action, &resolved),
    }
}

fn apply_single(flags: &mut Overrides, single: SingleDatasetArgs) {
    flags.data = single.data;
    flags.out = single.out;
    flags.method = single.method.map(Method::from);
    flags.task = single.task.map(Task::from);
}

fn dispatch(action: &Action, cfg: &ResolvedConfig) -> Result<()> {
    match action {
        Action::Simulate => commands::simulate(cfg),
        Action::Fit => commands::fit(cfg),
        Action::Cv => commands::cv(cfg),
        Action::Select { input } => commands::select(cfg, input),
        Action::Stability => commands::stability(cfg),
        Action::Validate { mask } => commands::validate(cfg, mask),
        Action::Report { input } => commands::report(cfg, input),
    }
}

fn echo_config(cfg: &ResolvedConfig) -> Result<()> {
    let text = serde_json::to_string_pretty(cfg)
        .map_err(|e| CliError::Usage(format!("cannot render config: {e}")))?;
    println!("{text}");
    Ok(())
}
