//! `evolm` command-line front end.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use evolm::exec::{init_thread_pool, threads_from_env, Execution};

#[derive(Parser)]
#[command(name = "evolm", version, about = "CNN features with an SCA-evolved ELM head")]
struct Cli {
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run SCA on benchmark functions and write convergence diagnostics.
    Bench(BenchArgs),
    /// Pretrain a CNN with a softmax head and save it frozen.
    Pretrain(PretrainArgs),
    /// Write features of a dataset under a frozen CNN.
    Extract(ExtractArgs),
    /// Evolve the ELM head on extracted features and write a model bundle.
    Evolve(EvolveArgs),
    /// Evaluate a model bundle on the test split of a dataset.
    Eval(EvalArgs),
    /// Sixteen-run sensitivity sweep over architecture, `a` and batch size.
    Sweep(SweepArgs),
    /// Generate a synthetic two-class image dataset.
    Synth(SynthArgs),
}

#[derive(Args)]
pub struct BenchArgs {
    /// Comma-separated ids, e.g. tf1,tf4.
    #[arg(long, value_delimiter = ',', default_value = "tf1,tf2,tf3,tf4,tf5,tf6,tf7,tf8,tf9")]
    pub functions: Vec<String>,
    /// Dimension for the scalable functions; fixed-dimension ones keep theirs.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, default_value_t = 50)]
    pub pop: usize,
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    #[arg(long, default_value_t = 2.0)]
    pub a: f64,
    /// Independent runs per function.
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write full population snapshots.
    #[arg(long)]
    pub history: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct DataArgs {
    /// Dataset root with train/ and test/ class folders.
    #[arg(long)]
    pub data: PathBuf,
    /// Copies per positive training image including the original (1 = off).
    #[arg(long, default_value_t = 1)]
    pub augment: usize,
}

#[derive(Args)]
pub struct PretrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "in_6c_2p_12c_2p")]
    pub arch: String,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 12)]
    pub batch: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// CNN model file written by `pretrain`.
    #[arg(long)]
    pub model: PathBuf,
    /// Seed of the augmentation stream (match `pretrain`).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvolveArgs {
    /// Training features CSV written by `extract`.
    #[arg(long)]
    pub features: PathBuf,
    /// CNN model file the features came from.
    #[arg(long)]
    pub cnn: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub pop: usize,
    #[arg(long, default_value_t = 10)]
    pub iters: usize,
    #[arg(long, default_value_t = 2.0)]
    pub a: f64,
    #[arg(long, default_value_t = 120)]
    pub hidden: usize,
    /// Stop early once the best loss reaches this value.
    #[arg(long)]
    pub loss_threshold: Option<f64>,
    /// Decision threshold stored in the bundle.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub history: bool,
    /// Bundle directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Bundle directory written by `evolve`.
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4")]
    pub thresholds: Vec<f64>,
    /// Normal quantile for the rate intervals.
    #[arg(long, default_value_t = 1.96)]
    pub z: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// JSON levels file `{"layers": [...], "a": [...], "batch": [...]}`.
    #[arg(long)]
    pub levels: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub pop: usize,
    #[arg(long, default_value_t = 10)]
    pub iters: usize,
    #[arg(long, default_value_t = 120)]
    pub hidden: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Images per class, split 70/30 into train/test.
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    /// Explicit train images per class (needs --test-per-class).
    #[arg(long, requires = "test_per_class")]
    pub train_per_class: Option<usize>,
    #[arg(long, requires = "train_per_class")]
    pub test_per_class: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = threads_from_env();
    if let Some(n) = threads {
        init_thread_pool(n);
    }
    let exec = if cli.sequential || threads == Some(1) {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let result = match &cli.command {
        Command::Bench(a) => commands::bench(a, exec),
        Command::Pretrain(a) => commands::pretrain(a, exec),
        Command::Extract(a) => commands::extract(a, exec),
        Command::Evolve(a) => commands::evolve(a, exec),
        Command::Eval(a) => commands::eval(a, exec),
        Command::Sweep(a) => commands::sweep(a, exec),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("evolm: {e}");
            e.exit_code()
        }
    }
}
