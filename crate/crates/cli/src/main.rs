use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use klrf::{ErrorCategory, KlrfError};

mod commands;

/// Train and evaluate kinematic-layout-aware random forests.
#[derive(Debug, Parser)]
#[command(name = "klrf", version)]
struct Cli {
    /// Worker threads; defaults to all available cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic benchmark as manifests plus sequence files.
    Synth(SynthArgs),
    /// Train a model from a dataset manifest.
    Train(TrainArgs),
    /// Score a model on one or more test manifests and write a JSON report.
    Eval(EvalArgs),
    /// Print one JSON prediction per test sequence.
    Predict(PredictArgs),
    /// Summarize a model file.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// TOML file with generator settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Test views in degrees, comma separated.
    #[arg(long, value_delimiter = ',')]
    views: Option<Vec<f64>>,
    #[arg(long)]
    sequences_per_class: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML file with training settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trees: Option<usize>,
    /// Tree count of each reference forest.
    #[arg(long)]
    reference_trees: Option<usize>,
    /// Train on view-invariant node clusters as well.
    #[arg(long)]
    cross_view: bool,
    /// Probability of the view-clustering term at a node in cross-view mode.
    #[arg(long)]
    qv_prob: Option<f64>,
    /// Enable training-time augmentation with the configured counts.
    #[arg(long)]
    augment: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Training manifest.
    #[arg(long)]
    data: PathBuf,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Train the plain appearance-entropy forest instead.
    #[arg(long)]
    baseline: bool,
    /// Keep the reference forests in the model file.
    #[arg(long)]
    keep_reference: bool,
    /// Also write a JSON training summary here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Include wall-clock timings in the JSON summary.
    #[arg(long)]
    timings: bool,
    /// Histogram bins for the usefulness summary.
    #[arg(long, default_value_t = 10)]
    bins: usize,
}

#[derive(Debug, Args)]
struct FilterArgs {
    /// Smooth predictions with the kinematic consistency filter.
    #[arg(long)]
    kcf: bool,
    /// Cyclic temporal offsets added to every group when filtering.
    #[arg(long, default_value_t = 0)]
    kcf_offsets: usize,
    /// Keep only sequences whose view is listed.
    #[arg(long, value_delimiter = ',')]
    views: Option<Vec<String>>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Test manifests; repeat the flag for several.
    #[arg(long, required = true)]
    data: Vec<PathBuf>,
    #[command(flatten)]
    filter: FilterArgs,
    /// Report file; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include wall-clock time in the report.
    #[arg(long)]
    timings: bool,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, required = true)]
    data: Vec<PathBuf>,
    #[command(flatten)]
    filter: FilterArgs,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(long)]
    model: PathBuf,
    /// Emit JSON instead of text.
    #[arg(long)]
    json: bool,
}

/// Usage errors exit with 2 (from the argument parser).
const EXIT_CONFIG: u8 = 3;
const EXIT_DATA: u8 = 4;
const EXIT_INTERNAL: u8 = 5;

fn exit_code(err: &KlrfError) -> u8 {
    match err.category() {
        ErrorCategory::Config => EXIT_CONFIG,
        ErrorCategory::Data => EXIT_DATA,
        ErrorCategory::Internal => EXIT_INTERNAL,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Predict(a) => commands::predict(a),
        Command::Inspect(a) => commands::inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
