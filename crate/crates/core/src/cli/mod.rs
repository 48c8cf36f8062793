//! The `pedet` command line.
//!
//! Exit codes: 0 on success, 1 when the input data is rejected, 2 on a
//! usage error.

mod commands;
mod config;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::Config;

#[derive(Debug, Parser)]
#[command(name = "pedet", version, about = "PE detection ensembling and evaluation toolkit")]
pub struct Cli {
    /// Worker threads for per-image work (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// TOML file with default settings for each command.
    #[arg(long, global = true, env = "PEDET_CONFIG")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Map a raw HU slice to an 8-bit PGM through a display window.
    Window(WindowArgs),
    /// Ensemble several models' predictions with NMS, NMW or WBF.
    Fuse(FuseArgs),
    /// Drop low-confidence detections on images the classifier calls negative.
    Guide(GuideArgs),
    /// Score predictions against ground truth.
    Eval(EvalArgs),
    /// Split a manifest into patient-disjoint parts.
    Split(SplitArgs),
    /// Infer the attention crop box from a heatmap.
    Crop(CropArgs),
    /// Tabulate several evaluation reports side by side.
    Report(ReportArgs),
    /// Check a manifest for structural and label consistency problems.
    Validate(ValidateArgs),
    /// Derive the PE label and expanded boxes from a lesion mask.
    Annotate(AnnotateArgs),
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    /// HU sidecar JSON describing the raw slice.
    #[arg(long)]
    pub input: PathBuf,
    /// Window level in HU [default: 40].
    #[arg(long, allow_hyphen_values = true)]
    pub level: Option<f64>,
    /// Window width in HU [default: 400].
    #[arg(long)]
    pub width: Option<f64>,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Prediction files; models are told apart by `model_id`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// nms, nmw or wbf [default: wbf].
    #[arg(long)]
    pub method: Option<String>,
    /// IoU threshold for clustering [default: 0.3].
    #[arg(long = "iou")]
    pub iou_threshold: Option<f64>,
    /// Per-model weights, e.g. `effdet=3,yolov8l=2.5,frcnn=1` [default: uniform].
    #[arg(long)]
    pub weights: Option<String>,
    /// Weight for models missing from `--weights`; without it they are an error.
    #[arg(long)]
    pub default_weight: Option<f64>,
    /// Drop weighted scores below this before fusing [default: 0.005].
    #[arg(long)]
    pub score_floor: Option<f64>,
    /// Output file (stdout when omitted).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GuideArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub verdicts: PathBuf,
    /// Classifier threshold [default: 0.5].
    #[arg(long)]
    pub theta: Option<f64>,
    /// Confidence floor on negative images [default: 0.018].
    #[arg(long)]
    pub conf_floor: Option<f64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub ground_truth: PathBuf,
    /// Comma-separated IoU thresholds [default: 0.2,0.5].
    #[arg(long, value_delimiter = ',')]
    pub iou_thresholds: Option<Vec<f64>>,
    /// Operating-point score threshold [default: 0.005].
    #[arg(long)]
    pub score_threshold: Option<f64>,
    /// Classifier verdicts; adds the image-level classification block.
    #[arg(long)]
    pub verdicts: Option<PathBuf>,
    /// Classifier threshold for the classification block [default: 0.5].
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// `80:20`, `70:10:20`, or `train=0.7,val=0.1,test=0.2`.
    #[arg(long)]
    pub ratios: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CropArgs {
    #[arg(long)]
    pub heatmap: PathBuf,
    #[arg(long)]
    pub image_width: usize,
    #[arg(long)]
    pub image_height: usize,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Evaluation reports, one table row each.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Row labels, comma-separated (default: file stems).
    #[arg(long, value_delimiter = ',')]
    pub labels: Option<Vec<String>>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// Lesion mask as a binary PGM; any nonzero pixel is foreground.
    #[arg(long)]
    pub mask: PathBuf,
    /// Pixels added around each lesion box [default: 5].
    #[arg(long)]
    pub margin: Option<usize>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Parses `std::env::args`, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let config = Config::load(cli.config.as_deref())?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    pool.install(|| commands::dispatch(cli.command, &config))
}
