//! `bnl`: property queries, dataset generation, training, evaluation and
//! experiment reproduction for Boolean-function nonlinearity.
//!
//! Exit codes: 0 success, 1 an expected-negative experiment finished,
//! 2 usage or input error, 3 numeric failure (divergence).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use bnl_core::dataset::Task;
use bnl_core::experiments::SetKind;
use bnl_core::neural::OptimizerKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "bnl",
    version,
    about = "Boolean function nonlinearity: exact algorithms and learned models"
)]
pub struct Cli {
    /// Print JSON lines instead of tables.
    #[arg(long, global = true)]
    pub json: bool,

    /// Log one line per training epoch to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Weight, degree, affinity and nonlinearity of one truth table.
    Props(PropsArgs),
    /// Generate a dataset file.
    Gen(GenArgs),
    /// Train a network on a dataset file.
    Train(TrainArgs),
    /// Evaluate a model on a dataset file.
    Eval(EvalArgs),
    /// Run one of the scripted experiments and write its report.
    Experiment(ExperimentArgs),
    /// Time fwt, naive and network nonlinearity (same as `experiment bench`).
    Bench(ExperimentArgs),
}

#[derive(Args, Debug)]
pub struct PropsArgs {
    /// Bit string (`0110`) or hex (`0x6`, `6b`).
    pub table: String,
    /// Also print the Walsh spectrum.
    #[arg(long)]
    pub spectrum: bool,
    /// Also print the algebraic normal form.
    #[arg(long)]
    pub anf: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Nonlinearity,
    WalshSpectrum,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Nonlinearity => Task::Nonlinearity,
            TaskArg::WalshSpectrum => Task::WalshSpectrum,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SelectArg {
    /// Distinct uniformly random functions.
    Random,
    /// Linearly independent sign vectors.
    Independent,
    /// Mutually orthogonal sign vectors.
    Orthogonal,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(short = 'n', long = "vars")]
    pub n: u32,
    #[arg(long, value_enum, default_value = "nonlinearity")]
    pub task: TaskArg,
    #[arg(long)]
    pub size: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "random")]
    pub select: SelectArg,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Split off this many records for training into `--output`; the rest go
    /// to `--test-output`.
    #[arg(long, requires = "test_output")]
    pub train_size: Option<usize>,
    #[arg(long, requires = "train_size")]
    pub test_output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Sgd,
    Adam,
}

impl From<OptimizerArg> for OptimizerKind {
    fn from(o: OptimizerArg) -> Self {
        match o {
            OptimizerArg::Sgd => OptimizerKind::Sgd,
            OptimizerArg::Adam => OptimizerKind::Adam,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ArchArg {
    /// Widths halving from `--base-width` down to one unit, ReLU between.
    Encoder,
    /// One dense layer as wide as the input.
    Linear,
    /// Dense(2N), negate, max-pool, negate.
    AffineMin,
}

/// Optimizer overrides shared by `train` and `experiment`.
#[derive(Args, Debug, Default)]
pub struct OptArgs {
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Evaluated every `--eval-every` epochs.
    #[arg(long)]
    pub eval: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub eval_every: usize,
    /// Continue from this model instead of building a fresh one.
    #[arg(long, conflicts_with_all = ["arch", "base_width"])]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub arch: Option<ArchArg>,
    #[arg(long)]
    pub base_width: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Keep biases at their initial values.
    #[arg(long)]
    pub freeze_bias: bool,
    #[command(flatten)]
    pub opt: OptArgs,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Print the confusion matrix (nonlinearity datasets).
    #[arg(long)]
    pub confusion: bool,
    /// Write the confusion matrix as CSV.
    #[arg(long)]
    pub confusion_csv: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExperimentId {
    LearnWalsh,
    MinExamples,
    AffineMin,
    EndToEnd,
    Bench,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SetArg {
    Orthogonal,
    Random,
}

impl From<SetArg> for SetKind {
    fn from(s: SetArg) -> Self {
        match s {
            SetArg::Orthogonal => SetKind::Orthogonal,
            SetArg::Random => SetKind::Random,
        }
    }
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    /// Omitted for the `bench` subcommand.
    #[arg(value_enum)]
    pub id: Option<ExperimentId>,
    #[arg(short = 'n', long = "vars")]
    pub n: u32,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Directory for the report, tables, datasets and models.
    #[arg(long, default_value = "reports")]
    pub out: PathBuf,
    #[command(flatten)]
    pub opt: OptArgs,

    /// learn-walsh: number of training functions.
    #[arg(long)]
    pub examples: Option<usize>,
    /// learn-walsh, min-examples: how the first N functions are chosen.
    #[arg(long, value_enum)]
    pub set: Option<SetArg>,
    /// learn-walsh: train the bias as well (needs more than N examples).
    #[arg(long)]
    pub train_bias: bool,

    /// min-examples: comma-separated training-set sizes.
    #[arg(long, value_delimiter = ',')]
    pub counts: Vec<usize>,
    /// min-examples: seeds averaged per point.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// min-examples: test functions; bench: functions timed.
    #[arg(long)]
    pub samples: Option<usize>,
    /// min-examples: skip the N versus 4N convergence probe.
    #[arg(long)]
    pub no_probe: bool,

    /// affine-min: start from the analytic weights.
    #[arg(long)]
    pub warm_start: bool,
    /// affine-min, end-to-end: training dataset file instead of generating one.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// end-to-end: test dataset file (with `--data`).
    #[arg(long, requires = "data")]
    pub test_data: Option<PathBuf>,
    /// end-to-end: first layer width.
    #[arg(long)]
    pub base_width: Option<usize>,
    /// end-to-end: functions generated before the split.
    #[arg(long)]
    pub total: Option<usize>,
    /// end-to-end: training examples.
    #[arg(long)]
    pub train_size: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,

    /// bench: trained model file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// bench: timing passes per measurement.
    #[arg(long)]
    pub repeats: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = commands::configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
