//! `loopgrade`: reference mesh, datasets, classifiers, assessment and
//! validation of PID load-disturbance rejection.

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod assess;
pub mod bank;
pub mod commands;
pub mod suites;
pub mod svg;

/// Exit code for invalid configuration, arguments or input files.
pub const EXIT_CONFIG: u8 = 2;
/// Exit code for numerical failures (infeasible tuning, failed fits,
/// exhausted sampling budgets, training errors).
pub const EXIT_NUMERIC: u8 = 3;

const EXIT_HELP: &str = "\
Exit codes:
  0  success
  2  configuration error (bad arguments, missing or malformed input files)
  3  numerical failure (infeasible tuning, failed identification, exhausted
     sampling budget, training error)";

#[derive(Debug, Parser)]
#[command(name = "loopgrade", version, about, after_help = EXIT_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize reference tunings on the (L1, L2) mesh.
    Mesh(MeshArgs),
    /// Generate balanced training and validation datasets.
    Gendata(GendataArgs),
    /// Train and evaluate classifiers.
    Train(TrainArgs),
    /// Assess one recorded disturbance-rejection response.
    Assess(AssessArgs),
    /// Run the validation suites.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output directory for mesh.json and the reference responses.
    #[arg(long, default_value = "mesh")]
    pub out: PathBuf,
    /// Restrict the grid, e.g. `0.1:0.2,0.1:0.2` for L1 and L2 ranges.
    #[arg(long)]
    pub range: Option<String>,
    /// Grid spacing in both L1 and L2.
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
}

#[derive(Debug, Args)]
pub struct GendataArgs {
    #[arg(long, default_value = "mesh/mesh.json")]
    pub mesh: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
    /// Training samples (even).
    #[arg(long)]
    pub train: Option<usize>,
    /// Validation samples (even).
    #[arg(long)]
    pub val: Option<usize>,
    /// 60000 training and 10000 validation samples.
    #[arg(long)]
    pub full_scale: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory holding train.csv and val.csv (and their .json sidecars).
    #[arg(long, default_value = "data")]
    pub data: PathBuf,
    /// Classifier kinds (gnb, lda, knn, tree, forest, adaboost, svm) or `all`.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub kind: Vec<String>,
    /// Feature sets: `all30`, `popular12` or `topk:K`.
    #[arg(long, value_delimiter = ',', default_value = "all30,popular12")]
    pub features: Vec<String>,
    /// Random-search iterations per kind; 0 trains the default settings.
    #[arg(long, default_value_t = 0)]
    pub search: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = "models")]
    pub out: PathBuf,
    /// Also run the top-k feature study for the tree-based kinds.
    #[arg(long)]
    pub study: bool,
    #[arg(long)]
    pub no_plots: bool,
}

#[derive(Debug, Args)]
pub struct AssessArgs {
    #[arg(long, default_value = "mesh/mesh.json")]
    pub mesh: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Two-column CSV `t,y` of the output deviation after the load step.
    #[arg(long)]
    pub response: PathBuf,
    #[arg(long)]
    pub kr: f64,
    #[arg(long)]
    pub ti: f64,
    #[arg(long, default_value_t = 0.0)]
    pub td: f64,
    /// Derivative filter ratio N.
    #[arg(long, default_value_t = 10.0)]
    pub n: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub delta_d: f64,
    /// Write an SVG overlay of the assessed and reference responses.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Write the full assessment as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value = "mesh/mesh.json")]
    pub mesh: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "validation")]
    pub out: PathBuf,
    #[arg(long)]
    pub no_plots: bool,
}

/// Error tagged with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub trait OrFail<T> {
    fn config(self) -> Result<T, Failure>;
    fn numeric(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrFail<T> for Result<T, E> {
    fn config(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: EXIT_CONFIG,
            error: e.into(),
        })
    }

    fn numeric(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: EXIT_NUMERIC,
            error: e.into(),
        })
    }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Mesh(a) => commands::mesh(&a),
        Command::Gendata(a) => commands::gendata(&a),
        Command::Train(a) => commands::train(&a),
        Command::Assess(a) => commands::assess(&a),
        Command::Validate(a) => commands::validate(&a),
    }
}
