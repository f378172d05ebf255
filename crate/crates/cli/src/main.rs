//! `abil`: generate data, train, evaluate, inspect programs and run the
//! search-cost benchmarks.
//!
//! Exit codes: 0 success, 1 I/O or internal error, 2 invalid configuration
//! or flags, 3 unusable data or artifacts, 4 search budget exhausted.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use abil_core::tasks::TaskId;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("budget: {0}")]
    Budget(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Budget(_) => 4,
            CliError::Io(_) | CliError::Other(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "abil",
    version,
    about = "Learn recursive programs and perception models jointly by abduction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write train/val/test example files for a task.
    GenData(GenDataArgs),
    /// Train from a TOML run configuration.
    Train {
        config: PathBuf,
        /// Scoring threads; 1 makes runs reproducible bit for bit.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Report metrics of a trained stage on example files, per length.
    Eval(EvalArgs),
    /// Print the program learned in a stage directory.
    ShowProgram { run: PathBuf },
    /// Compare induce-first and label-first search cost on sum batches.
    BenchAbduction(BenchAbductionArgs),
    /// Compare induction cost across metarule subsets.
    BenchMetarules(BenchMetarulesArgs),
}

/// Where item features come from.
#[derive(Args, Clone, Debug)]
pub struct SourceArgs {
    /// Standard deviation of synthetic feature noise.
    #[arg(long, default_value_t = 0.25)]
    pub noise: f64,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    /// Seed of the synthetic class prototypes; keep it fixed across files
    /// that must share a feature space.
    #[arg(long, default_value_t = 0)]
    pub prototype_seed: u64,
    /// IDX image file, used instead of synthetic features.
    #[arg(long, requires = "idx_labels")]
    pub idx_images: Option<PathBuf>,
    #[arg(long, requires = "idx_images")]
    pub idx_labels: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    #[arg(long)]
    pub task: TaskId,
    #[arg(long)]
    pub train: usize,
    #[arg(long, default_value_t = 0)]
    pub val: usize,
    #[arg(long, default_value_t = 0)]
    pub test: usize,
    /// Sequence length or inclusive range, e.g. `4` or `2-5`.
    #[arg(long, default_value = "2-5")]
    pub lengths: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Stage directory written by `train`.
    #[arg(long)]
    pub run: PathBuf,
    /// Example files; may be repeated.
    #[arg(long, required = true)]
    pub data: Vec<PathBuf>,
    /// Use the stored generating digits instead of the model.
    #[arg(long)]
    pub ground_truth: bool,
    /// Also write the metrics table here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchAbductionArgs {
    #[arg(long, default_value_t = 20)]
    pub batches: usize,
    #[arg(long, default_value_t = 4)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 4)]
    pub length: usize,
    /// Label-first attempts per batch before giving up.
    #[arg(long, default_value_t = 20_000)]
    pub cap: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sum example file to draw batches from instead of generating them.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Stage directory whose classifier scores the items; an untrained
    /// network otherwise.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub source: SourceArgs,
}

#[derive(Args, Debug)]
pub struct BenchMetarulesArgs {
    #[arg(long, default_value = "sum")]
    pub task: TaskId,
    /// Subset sizes to sweep.
    #[arg(long, value_delimiter = ',', default_value = "2,3,9")]
    pub sizes: Vec<usize>,
    /// Metarules every swept subset must contain.
    #[arg(long, default_value = "chain,ident")]
    pub require: String,
    /// Extra comma-separated subset to run; may be repeated.
    #[arg(long)]
    pub subset: Vec<String>,
    #[arg(long, default_value_t = 20)]
    pub examples: usize,
    #[arg(long, default_value = "1-5")]
    pub lengths: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub source: SourceArgs,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData(a) => commands::gen_data(&a),
        Command::Train { config, workers } => commands::train_run(&config, workers),
        Command::Eval(a) => commands::eval(&a),
        Command::ShowProgram { run } => commands::show_program(&run),
        Command::BenchAbduction(a) => commands::bench_abduction_cmd(&a),
        Command::BenchMetarules(a) => commands::bench_metarules_cmd(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
