//! `ppgcell` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ppgcell::error::ErrorClass;
use ppgcell::{Error, PipelineConfig, Result, Scheme};

#[derive(Parser, Debug)]
#[command(name = "ppgcell", version, about = "PPG-cell deep fake source detection")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// Pipeline configuration (JSON); flags below override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Window length in frames.
    #[arg(long, global = true)]
    pub omega: Option<usize>,
    /// Build and use cells without the PSD block.
    #[arg(long, global = true)]
    pub no_psd: bool,
    /// Aggregation scheme for verdicts and reports.
    #[arg(long, global = true, value_parser = parse_scheme)]
    pub scheme: Option<Scheme>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write every rectified frame as `<DIR>/<video>/%06d_face%d.png`.
    #[arg(long, global = true, value_name = "DIR")]
    pub dump_rectified: Option<PathBuf>,
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    s.parse::<Scheme>().map_err(|e| e.to_string())
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract PPG cells for every video of a manifest (resumable).
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write a grayscale PNG next to each cell.
        #[arg(long)]
        png: bool,
    },
    /// Train the built-in classifier on the training split's cells.
    Train {
        #[arg(long)]
        cells: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch loss/accuracy CSV.
        #[arg(long)]
        history: Option<PathBuf>,
        /// Which videos to train on.
        #[arg(long, value_enum, default_value_t = Split::Train)]
        split: Split,
    },
    /// Per-video verdicts from a model and cells or videos.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        /// Verdict JSON (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the per-cell probabilities.
        #[arg(long)]
        cell_predictions: Option<PathBuf>,
    },
    /// Accuracy report of a model on a manifest split.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Pre-extracted cells; extracted on the fly when absent.
        #[arg(long)]
        cells: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Split::Test)]
        split: Split,
        /// Report JSON (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Row-normalized confusion matrix CSV.
        #[arg(long)]
        confusion: Option<PathBuf>,
    },
    /// Verdicts from a per-cell prediction file written by `predict`.
    Aggregate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Residual fingerprints per class.
    Fingerprint {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Classes to process (default: every class except the baseline).
        #[arg(long = "class")]
        classes: Vec<String>,
        /// Class whose mean residual is subtracted; "none" disables it.
        #[arg(long, default_value = ppgcell::REAL_CLASS)]
        baseline: String,
        #[arg(long)]
        nlm_h: Option<f64>,
        #[arg(long)]
        nlm_patch: Option<usize>,
        #[arg(long)]
        nlm_search: Option<usize>,
        #[arg(long)]
        nlm_stack: Option<usize>,
    },
    /// Generate a synthetic labeled dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Dataset description (JSON); defaults to 4 generators plus "real".
        #[arg(long)]
        synth_config: Option<PathBuf>,
        #[arg(long)]
        generators: Option<usize>,
        #[arg(long)]
        videos_per_class: Option<usize>,
        #[arg(long)]
        frames: Option<usize>,
    },
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct InputSource {
    /// Directory of `.ppgc` cells.
    #[arg(long)]
    pub cells: Option<PathBuf>,
    /// Manifest whose videos are extracted on the fly.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// A single video's frame directory (needs --landmarks and --fps).
    #[arg(long, requires_all = ["landmarks", "fps"])]
    pub frames: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InputArgs {
    #[command(flatten)]
    pub source: InputSource,
    #[arg(long)]
    pub landmarks: Option<PathBuf>,
    #[arg(long)]
    pub fps: Option<f64>,
    /// Video id for --frames input.
    #[arg(long, default_value = "video")]
    pub id: String,
    /// Only this video (cells input).
    #[arg(long)]
    pub video: Option<String>,
    /// Manifest split to use with --manifest.
    #[arg(long, value_enum, default_value_t = Split::All)]
    pub split: Split,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
    All,
}

fn resolve_config(g: &GlobalArgs) -> Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(o) = g.omega {
        cfg.omega = o;
    }
    if g.no_psd {
        cfg.psd_enabled = false;
    }
    if let Some(s) = g.scheme {
        cfg.scheme = s;
    }
    if let Some(w) = g.workers {
        cfg.workers = w;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
        cfg.classifier.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli.global)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build_global()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let dump = cli.global.dump_rectified.as_deref();
    match cli.command {
        Command::Extract { manifest, out, png } => commands::extract(&cfg, &manifest, &out, png, dump),
        Command::Train {
            cells,
            manifest,
            out,
            history,
            split,
        } => commands::train(&cfg, &cells, &manifest, &out, history.as_deref(), split),
        Command::Predict {
            model,
            input,
            out,
            cell_predictions,
        } => commands::predict(&cfg, &model, &input, out.as_deref(), cell_predictions.as_deref(), dump),
        Command::Evaluate {
            model,
            manifest,
            cells,
            split,
            out,
            confusion,
        } => commands::evaluate(&cfg, &model, &manifest, cells.as_deref(), split, out.as_deref(), confusion.as_deref(), dump),
        Command::Aggregate { predictions, out } => commands::aggregate(&cfg, &predictions, out.as_deref()),
        Command::Fingerprint {
            manifest,
            out,
            classes,
            baseline,
            nlm_h,
            nlm_patch,
            nlm_search,
            nlm_stack,
        } => {
            let mut cfg = cfg;
            if let Some(h) = nlm_h {
                cfg.nlm.h = h;
            }
            if let Some(p) = nlm_patch {
                cfg.nlm.patch = p;
            }
            if let Some(s) = nlm_search {
                cfg.nlm.search = s;
            }
            if let Some(s) = nlm_stack {
                cfg.nlm.stack = s;
            }
            cfg.validate()?;
            commands::fingerprint(&cfg, &manifest, &out, &classes, &baseline)
        }
        Command::Synth {
            out,
            synth_config,
            generators,
            videos_per_class,
            frames,
        } => commands::synth(&cfg, cli.global.seed, &out, synth_config.as_deref(), generators, videos_per_class, frames),
    }
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Internal => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let class = e.class();
            let body = serde_json::json!({
                "error": {
                    "class": match class {
                        ErrorClass::Config => "config",
                        ErrorClass::Data => "data",
                        ErrorClass::Internal => "internal",
                    },
                    "kind": e.kind(),
                    "message": e.to_string(),
                }
            });
            eprintln!("{body}");
            ExitCode::from(exit_code(class))
        }
    }
}
