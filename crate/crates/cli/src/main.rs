//! `cmp`: staged hyperspectral experiment pipeline around CMP and MPCA.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ClassifierKind, ConfigError, PhiMeanArg, Preset, ReducerKind, SplitBasis, Subset, SynthKind};

#[derive(Parser)]
#[command(name = "cmp", version, about = "Tensor subspace learning experiments (CMP, MPCA)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Cut labeled patches out of a hyperspectral cube.
    Patches(PatchesArgs),
    /// Draw a seeded train/test split of a patch archive.
    Split(SplitArgs),
    /// Fit a reducer (CMP, MPCA or pass-through) on the training split.
    Fit(FitArgs),
    /// Project archive samples through a fitted reducer.
    Transform(TransformArgs),
    /// Train a classifier on (optionally projected) training samples.
    Train(TrainArgs),
    /// Evaluate a classifier on the test split.
    Eval(EvalArgs),
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: Option<SynthKind>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct PatchesArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Odd patch side length.
    #[arg(long)]
    pub patch_size: Option<usize>,
    /// Named positive-class grouping.
    #[arg(long, value_enum, conflicts_with = "positive_ids")]
    pub preset: Option<Preset>,
    /// Ground-truth ids forming the positive class.
    #[arg(long, value_delimiter = ',')]
    pub positive_ids: Option<Vec<u32>>,
    /// Output archive directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub archive: Option<PathBuf>,
    /// Training samples drawn per class.
    #[arg(long)]
    pub per_class: Option<usize>,
    /// Draw per original ground-truth class or per binary label.
    #[arg(long, value_enum)]
    pub per_class_basis: Option<SplitBasis>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for train.csv, test.csv and split.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct FitArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub archive: Option<PathBuf>,
    /// Split directory.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub reducer: Option<ReducerKind>,
    /// Spectral components: per class for CMP (2k in total), in total for MPCA.
    #[arg(long)]
    pub k: Option<usize>,
    /// Output extent of both spatial modes.
    #[arg(long)]
    pub spatial: Option<usize>,
    /// Explicit output extents for every mode.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub phi_mean: Option<PhiMeanArg>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Model file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fit report path (default: model path with a .json extension).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args)]
pub struct TransformArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub archive: Option<PathBuf>,
    /// Reducer model file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub subset: Option<Subset>,
    /// Output archive directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub archive: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Reducer applied before training.
    #[arg(long)]
    pub reducer_model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub classifier: Option<ClassifierKind>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub inner_steps: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Classifier file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub archive: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub reducer_model: Option<PathBuf>,
    /// Classifier file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Evaluation report to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<cmp_core::Error>() {
            return if e.is_numerical() { 4 } else { 3 };
        }
    }
    3
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("CMP_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| config::config_error(format!("CMP_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Patches(a) => commands::patches(a),
        Command::Split(a) => commands::split(a),
        Command::Fit(a) => commands::fit(a),
        Command::Transform(a) => commands::transform(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
