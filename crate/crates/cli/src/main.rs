//! `fmst`: track sequences, benchmark, train weight networks, and generate
//! synthetic data.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage or input error.

mod commands;
mod overlay;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "fmst", version, about = "Feature-map selection tracker")]
struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track one OTB-style sequence from its first ground-truth rect.
    Track(TrackArgs),
    /// One-pass evaluation over every sequence under a dataset root.
    Bench(BenchArgs),
    /// Train the positive and negative weight networks.
    Train(TrainArgs),
    /// Render synthetic sequences in OTB layout.
    Gen(GenArgs),
}

/// Settings shared by every subcommand. Precedence: defaults, then
/// `--config`, then `--set`, then the dedicated flags.
#[derive(Args, Clone, Default)]
pub struct Common {
    /// Flat `key = value` config file (a previous manifest works too).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override one config key, e.g. `--set sampler.sigma_xy=0.02`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Seed for candidate sampling, training and scene generation.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(short, long, default_value = "fmst_out")]
    output: PathBuf,
}

#[derive(Args, Clone, Default)]
pub struct TrackerFlags {
    /// `learned` or `fmst_hard`.
    #[arg(long)]
    mode: Option<String>,

    /// Directory holding `pos.fwn1` and `neg.fwn1`.
    #[arg(long)]
    net: Option<PathBuf>,

    /// `synthetic` or `file`.
    #[arg(long)]
    backbone: Option<String>,

    /// Root of precomputed `<task>/<frame:08>.fmt1` tensors (implies `--backbone file`).
    #[arg(long)]
    tensor_dir: Option<PathBuf>,

    /// Backbone channel count.
    #[arg(long)]
    channels: Option<usize>,
}

#[derive(Args)]
pub struct TrackArgs {
    /// Sequence directory with `groundtruth_rect.txt` and `img/`.
    sequence: PathBuf,

    #[command(flatten)]
    common: Common,

    #[command(flatten)]
    tracker: TrackerFlags,

    /// Also write frames with the predicted box drawn on them.
    #[arg(long)]
    overlay: bool,
}

#[derive(Args)]
pub struct BenchArgs {
    /// Directory whose subdirectories are sequences.
    root: PathBuf,

    #[command(flatten)]
    common: Common,

    #[command(flatten)]
    tracker: TrackerFlags,

    /// Score the ground truth itself instead of running the tracker.
    #[arg(long)]
    oracle: bool,

    /// Write precision and success plots as SVG.
    #[arg(long)]
    svg: bool,

    /// Parallel tasks (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Sequence directories, or roots containing them.
    #[arg(required = true)]
    roots: Vec<PathBuf>,

    #[command(flatten)]
    common: Common,

    #[command(flatten)]
    tracker: TrackerFlags,

    #[arg(long)]
    epochs: Option<usize>,

    #[arg(long)]
    patience: Option<usize>,

    #[arg(long)]
    lr: Option<f64>,
}

#[derive(Args)]
pub struct GenArgs {
    /// JSON scene spec to render.
    #[arg(long, conflicts_with_all = ["suite", "random"])]
    spec: Option<PathBuf>,

    /// Render the built-in ten-task suite.
    #[arg(long)]
    suite: bool,

    /// Render this many random training scenes.
    #[arg(long)]
    random: Option<usize>,

    /// Frames per random scene.
    #[arg(long, default_value_t = 20)]
    frames: usize,

    /// Sequence name for `--spec` (default: the spec file stem).
    #[arg(long)]
    name: Option<String>,

    #[command(flatten)]
    common: Common,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Track(a) => commands::track(a),
        Command::Bench(a) => commands::bench(a),
        Command::Train(a) => commands::train(a),
        Command::Gen(a) => commands::gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
