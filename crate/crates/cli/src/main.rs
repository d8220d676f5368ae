//! `ailsr`: prepare data, train, evaluate and compare runs.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 a required
//! artifact (teacher, checkpoint, prepared dataset) is missing, 4 data error.

mod commands;
mod config;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use ail_sr::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "ailsr",
    version,
    about = "Adaptive importance learning for lightweight super-resolution networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cut an image directory into a patch archive with its manifest.
    Prepare(PrepareArgs),
    /// Train a network as described by a run config.
    Train(TrainArgs),
    /// Score a checkpoint on an image directory.
    Eval(EvalArgs),
    /// Tabulate PSNR/SSIM deltas of several evaluation reports against the first.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AugMode {
    /// Original orientation at full size only.
    None,
    /// Rotations 90/180/270, horizontal flips, and rescaling by 0.5/0.7/1.0.
    Full,
}

#[derive(Args, Debug)]
pub struct PrepareArgs {
    /// Directory of training images (png, ppm, pgm).
    #[arg(long)]
    pub images: PathBuf,
    /// Upscaling factor the pairs are degraded by.
    #[arg(long, default_value_t = 2)]
    pub scale: u32,
    /// Output directory for manifest.json and patches.bin.
    #[arg(long)]
    pub out: PathBuf,
    /// Augmentation recipe.
    #[arg(long, value_enum, default_value_t = AugMode::None)]
    pub aug: AugMode,
    /// Patch side length in pixels.
    #[arg(long, default_value_t = 41)]
    pub patch: usize,
    /// Distance between neighbouring patches.
    #[arg(long, default_value_t = 41)]
    pub stride: usize,
    /// Recorded in the manifest.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Command-line overrides of the run config. The defaults shown apply when
/// neither the config nor the command line sets a value.
#[derive(Args, Debug, Default)]
pub struct TrainOverrides {
    /// Epochs of the first (or only) round [default: 50]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Epochs of each later AIL round [default: epochs / 5]
    #[arg(long)]
    pub round_epochs: Option<usize>,
    /// Mini-batch size [default: 128]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Initial learning rate [default: 0.1]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Learning-rate divisor applied every --lr-decay-every epochs [default: 10]
    #[arg(long)]
    pub lr_decay_factor: Option<f64>,
    /// Epochs between learning-rate decays [default: 10]
    #[arg(long)]
    pub lr_decay_every: Option<usize>,
    /// SGD momentum [default: 0.9]
    #[arg(long)]
    pub momentum: Option<f64>,
    /// SGD weight decay [default: 0.0001]
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Gradient clip; elements are clipped to ±clip/lr [default: 0.4]
    #[arg(long)]
    pub clip: Option<f64>,
    /// Importance step size λ [default: 0.15]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// AIL rounds T after the first [default: 10]
    #[arg(long)]
    pub iterations: Option<u32>,
    /// Teacher importance midpoint μ₀ [default: 0.01]
    #[arg(long)]
    pub mu0: Option<f64>,
    /// Teacher importance steepness α₀ [default: 100]
    #[arg(long)]
    pub alpha0: Option<f64>,
    /// Weight of the teacher term in distillation [default: 0.1]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Seed of the batch order [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run directory, replacing the config's "output"
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Run config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub overrides: TrainOverrides,
    /// Replace the artifacts of an earlier run in the output directory.
    #[arg(long)]
    pub force: bool,
    /// Worker threads; values above 1 may change results in the last bits.
    /// Overrides the config's "threads" [default: 1]
    #[arg(long, env = "AILSR_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Directory of ground-truth images.
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub scale: u32,
    /// Directory to write eval.csv and eval.json into.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Worker threads; metrics do not depend on it.
    #[arg(long, env = "AILSR_THREADS", default_value_t = 1)]
    pub threads: usize,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Report directories (holding eval.json) or run directories with a
    /// single report under reports/. The first one is the baseline.
    #[arg(long, num_args = 2.., required = true)]
    pub runs: Vec<PathBuf>,
    /// CSV output; the aligned text table goes next to it with a .txt extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A user-facing error together with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    pub fn missing(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Failure {
            code: 4,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) => Failure::usage(e.to_string()),
            Error::MissingTeacher { .. } => Failure::missing(e.to_string()),
            _ => Failure::data(e.to_string()),
        }
    }
}

pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::usage(format!("cannot start {threads} worker threads: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Prepare(args) => commands::prepare(&args),
        Command::Train(args) => train::train(args),
        Command::Eval(args) => commands::eval(&args),
        Command::Compare(args) => commands::compare(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
