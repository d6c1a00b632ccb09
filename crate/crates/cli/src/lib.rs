//! `dehate` command-line driver.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors. Machine
//! readable output goes to stdout, diagnostics to stderr. `DEHATE_THREADS`
//! caps the worker pool.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

pub use config::RunConfig;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;

#[derive(Debug)]
pub(crate) enum Failure {
    Usage(String),
    Data(String),
}

impl From<dehate_core::Error> for Failure {
    fn from(e: dehate_core::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

pub(crate) type CmdResult = Result<(), Failure>;

#[derive(Parser, Debug)]
#[command(name = "dehate", version, about = "Locate, blur and score hateful image regions")]
pub struct Cli {
    /// JSON file with defaults for thresholds, budget, seed and masker shape.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Aggregate an attention stack into a heatmap (PNG and/or DHT1).
    Heatmap(HeatmapArgs),
    /// Threshold a DHT1 heatmap into a mask PNG.
    Mask(MaskArgs),
    /// Black out and box-average the hateful region of an image.
    Blur(BlurArgs),
    /// Hate spans of a text against its normalized rewrite.
    Spans(SpansArgs),
    /// Generation prompts as JSON lines.
    Prompt(PromptArgs),
    /// Pixels that differ between an original and its blurred version.
    RecoverMask(RecoverArgs),
    /// Mean IoU of `<id>.png` predictions against manifest ground truth.
    Score(ScoreArgs),
    /// Rank teams from score reports; CSV on stdout.
    Leaderboard(LeaderboardArgs),
    /// Train the span-conditioned masker.
    Train(TrainArgs),
    /// Predict masks with a trained masker.
    Predict(PredictArgs),
    /// Finite-difference check of the autodiff engine and masker.
    Gradcheck(GradcheckArgs),
    /// Write a colored-rectangle dataset with a manifest.
    Synth(SynthArgs),
    /// Manifest utilities.
    #[command(subcommand)]
    Manifest(ManifestCommand),
}

#[derive(Args, Debug)]
pub struct HeatmapArgs {
    /// DHT1 attention tensor `[tokens, layers, heads, steps, h, w]`.
    #[arg(long)]
    pub stack: PathBuf,
    /// JSON metadata: `{"tokens": [...], "image_h": H, "image_w": W}`.
    #[arg(long)]
    pub meta: PathBuf,
    /// Token indices to aggregate.
    #[arg(long, value_delimiter = ',')]
    pub tokens: Vec<usize>,
    /// Token strings to aggregate, matched case-insensitively.
    #[arg(long, value_delimiter = ',')]
    pub words: Vec<String>,
    #[arg(long)]
    pub out_png: Option<PathBuf>,
    #[arg(long)]
    pub out_tensor: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MaskArgs {
    #[arg(long)]
    pub heatmap: PathBuf,
    #[arg(long)]
    pub tau: Option<f32>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BlurArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// DHT1 heatmap with the image's dims.
    #[arg(long)]
    pub heatmap: PathBuf,
    #[arg(long)]
    pub tau_black: Option<f32>,
    #[arg(long)]
    pub tau_avg: Option<f32>,
    #[arg(long)]
    pub box_radius: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the blacked-out mask.
    #[arg(long)]
    pub mask_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SpansArgs {
    /// Hateful text (single-pair mode).
    #[arg(long, requires = "normalized", conflicts_with = "manifest")]
    pub hateful: Option<String>,
    #[arg(long)]
    pub normalized: Option<String>,
    /// Emit one JSON line per row that has `normalized_text`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PromptArgs {
    #[arg(long, conflicts_with = "text")]
    pub manifest: Option<PathBuf>,
    /// Single tweet instead of a manifest.
    #[arg(long)]
    pub text: Option<String>,
    /// Normalized rewrite of `--text`, used to locate spans.
    #[arg(long, requires = "text")]
    pub normalized: Option<String>,
    #[arg(long)]
    pub split: Option<SplitArg>,
    #[arg(long)]
    pub word_budget: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RecoverArgs {
    #[arg(long)]
    pub original: PathBuf,
    #[arg(long)]
    pub blurred: PathBuf,
    /// Per-channel difference treated as unchanged.
    #[arg(long, default_value_t = 0)]
    pub tol: u8,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Directory of `<id>.png` predicted masks.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Rows to score; default is every row with ground truth.
    #[arg(long)]
    pub split: Option<SplitArg>,
    /// Write the per-instance report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LeaderboardArgs {
    /// `NAME=REPORT.json`, repeated per team.
    #[arg(long = "team", required = true)]
    pub teams: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct MaskerShape {
    #[arg(long)]
    pub image_size: Option<usize>,
    #[arg(long)]
    pub patch_size: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Encoder and decoder depth.
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long)]
    pub span_embed_dim: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Train rows with masks; conflicts with `--synthetic`.
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub manifest: Option<PathBuf>,
    /// Train on this many generated rectangle instances.
    #[arg(long)]
    pub synthetic: Option<usize>,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, value_enum, default_value_t = LossArg::Bce)]
    pub loss: LossArg,
    /// Instances per gradient step; all at once when absent.
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub shape: MaskerShape,
    /// Checkpoint directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-step losses as JSON.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub split: Option<SplitArg>,
    #[arg(long)]
    pub tau: Option<f32>,
    /// Directory receiving `<id>.png`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 50)]
    pub graphs: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Skip the miniature masker check.
    #[arg(long)]
    pub graphs_only: bool,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 16)]
    pub count: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub image_size: Option<usize>,
    #[arg(long)]
    pub patch_size: Option<usize>,
    #[arg(long, value_enum, default_value_t = SplitArg::Train)]
    pub split: SplitArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum ManifestCommand {
    /// Check rows and print split counts as JSON.
    Validate { path: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Bce,
    SoftIou,
}

fn thread_count() -> Result<Option<usize>, Failure> {
    match std::env::var("DEHATE_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::Usage(format!(
                "DEHATE_THREADS must be a positive integer, got `{v}`"
            ))),
        },
    }
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = thread_count().and_then(|threads| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| Failure::Data(format!("cannot start worker pool: {e}")))?;
        pool.install(|| commands::dispatch(cli))
    });
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            EXIT_DATA
        }
    }
}
