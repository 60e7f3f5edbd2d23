use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "unmixx",
    about = "Two-singer separation toolkit: mixing, separation, evaluation and diagnostics",
    disable_version_flag = true
)]
pub struct Cli {
    /// Print name, version and default configuration as JSON.
    #[arg(long, global = true)]
    pub version: bool,

    /// Seed for every random draw; mandatory for stochastic subcommands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for data-parallel sections (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// JSON settings file for the subcommand, or `dump` to print the
    /// effective configuration and exit. May be given twice.
    #[arg(long, global = true, value_name = "PATH|dump")]
    pub config: Vec<String>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mine tempo-matched, downbeat-aligned mixtures from an annotated corpus.
    Mix(MixArgs),
    /// Harmonic overlap score between two F0 tracks.
    ScoreHarmonic(ScoreArgs),
    /// Separate a two-singer mixture.
    Separate(SeparateArgs),
    /// Evaluate estimates listed in a manifest.
    Eval(EvalArgs),
    /// Metrics of perfect references after swapping a fraction of segments.
    SwapSim(SwapSimArgs),
    /// Compare analytic loss gradients with central finite differences.
    GradCheck(GradCheckArgs),
    /// Optimize two masks on a two-sine mixture and log the trajectory.
    DemoPenalty(DemoArgs),
    /// Run the invariant suite on synthetic signals.
    Selftest(SelftestArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Mix(_) => "mix",
            Command::ScoreHarmonic(_) => "score-harmonic",
            Command::Separate(_) => "separate",
            Command::Eval(_) => "eval",
            Command::SwapSim(_) => "swap-sim",
            Command::GradCheck(_) => "grad-check",
            Command::DemoPenalty(_) => "demo-penalty",
            Command::Selftest(_) => "selftest",
        }
    }
}

#[derive(Debug, Args)]
pub struct MixArgs {
    /// Directory of song WAV files.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Directory of `<stem>.json` annotations.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of mixtures to write.
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    /// Crop length in seconds.
    #[arg(long = "length-s")]
    pub length_s: Option<f64>,
    /// Batch size.
    #[arg(long = "B")]
    pub batch: Option<usize>,
    /// Candidates drawn per batch slot.
    #[arg(long = "M")]
    pub pool: Option<usize>,
    /// Candidates kept per batch slot.
    #[arg(long = "m")]
    pub keep: Option<usize>,
    /// Maximum BPM distance from a tempo group's anchor.
    #[arg(long = "tempo-tolerance")]
    pub tempo_tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Annotation JSON with an `f0` track, or a WAV file to estimate one from.
    #[arg(long)]
    pub a: PathBuf,
    /// Second track, in the same forms as `--a`.
    #[arg(long)]
    pub b: PathBuf,
}

#[derive(Debug, Args)]
pub struct SeparateArgs {
    /// Mixture WAV; resampled to the separator rate if needed.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output WAV for the first estimate.
    #[arg(long)]
    pub out1: PathBuf,
    /// Output WAV for the second estimate.
    #[arg(long)]
    pub out2: PathBuf,
    /// Weight blob; seeded random weights when absent.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Ground-truth pair: apply ideal ratio masks instead of the network.
    #[arg(long, num_args = 2, value_names = ["GT1", "GT2"])]
    pub ideal: Option<Vec<PathBuf>>,
    /// Band scheme JSON (`{"edges": [...]}`).
    #[arg(long)]
    pub bands: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// JSON array of items: `id`, `mix`, `est` and `gt` pairs, optional `same_singer`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Report JSON path.
    #[arg(long)]
    pub out: PathBuf,
    /// Segment length in seconds for the segment-wise metrics.
    #[arg(long = "seg-s")]
    pub seg_s: Option<f64>,
    /// Also write per-item metrics as CSV next to the report.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct SwapSimArgs {
    /// First reference WAV.
    #[arg(long, required_unless_present = "synthetic", requires = "gt2")]
    pub gt1: Option<PathBuf>,
    /// Second reference WAV, same length and rate.
    #[arg(long, required_unless_present = "synthetic", requires = "gt1")]
    pub gt2: Option<PathBuf>,
    /// Render a same-singer pair of this many seconds instead of reading references.
    #[arg(long, conflicts_with_all = ["gt1", "gt2"], value_name = "SECONDS")]
    pub synthetic: Option<f64>,
    /// Comma-separated fractions of segments to swap.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.2, 0.3, 0.4, 0.5])]
    pub ratios: Vec<f64>,
    /// CSV output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Segment length in seconds.
    #[arg(long = "seg-s")]
    pub seg_s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    /// Coordinates probed per loss.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Central-difference step.
    #[arg(long)]
    pub h: Option<f64>,
    /// Maximum relative error.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Optional JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Per-step CSV trajectory.
    #[arg(long)]
    pub out: PathBuf,
    /// Penalty weight; 0 gives the baseline trajectory.
    #[arg(long = "lambda-penalty")]
    pub lambda_penalty: Option<f64>,
    #[arg(long = "lambda-mag")]
    pub lambda_mag: Option<f64>,
    /// Gradient-descent step size on the mask logits.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// First step at which the penalty term is active.
    #[arg(long = "penalty-from-step")]
    pub penalty_from_step: Option<usize>,
    /// Tone frequencies in Hz.
    #[arg(long = "freq-a")]
    pub freq_a: Option<f64>,
    #[arg(long = "freq-b")]
    pub freq_b: Option<f64>,
    /// Peak amplitude of each tone.
    #[arg(long)]
    pub amplitude: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Optional JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
