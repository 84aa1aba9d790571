//! Command-line front end: argument parsing, config resolution, error
//! categories and exit codes. Subcommand bodies live in `commands`.

mod commands;
mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::Config;

use crate::colmap_io::FormatError;
use crate::eval::EvalError;
use crate::pipeline::PipelineError;
use crate::poi::PoiError;

/// Floor-plan registered pose datasets from walk-through videos.
#[derive(Debug, Parser)]
#[command(name = "floorpose", version, propagate_version = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
#[command(next_help_heading = "Global options")]
pub struct GlobalArgs {
    /// TOML config file
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one config key (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Floor name, used as the dataset banner
    #[arg(long, global = true, value_name = "NAME")]
    pub floor: Option<String>,
    /// Maximum parallel workers
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// RANSAC seed
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the frame indices sampled from a video
    Sample(SampleArgs),
    /// Reconstruct and register project folders onto the floor plan
    Annotate(AnnotateArgs),
    /// Pool registered projects into train and test pose files
    Export(ExportArgs),
    /// Compare predicted poses with ground truth
    Evaluate(EvaluateArgs),
    /// List points of interest near a plan position
    PoiQuery(PoiQueryArgs),
    /// Write the plan-space camera path of a registered model
    PlotPath(PlotPathArgs),
    /// Print a sparse model in readable form
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Video file; its stem prefixes the frame names
    #[arg(long, value_name = "FILE")]
    pub video: PathBuf,
    /// Frames per second
    #[arg(long)]
    pub fps: f64,
    /// Duration in seconds
    #[arg(long)]
    pub duration: f64,
    /// Frame interval (defaults to the config value)
    #[arg(long, value_name = "FRAMES")]
    pub interval: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// Project folders, each holding video.toml and geo_coord.txt
    #[arg(required = true, value_name = "PROJECT")]
    pub projects: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Registered project folders (reads <PROJECT>/sparse/geo)
    #[arg(required = true, value_name = "PROJECT")]
    pub projects: Vec<PathBuf>,
    /// Output folder for image_train_all.txt and image_test_all.txt
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Also write the per-image geometric archive into this folder
    #[arg(long, value_name = "DIR")]
    pub geometric: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predicted poses in pose-record format
    #[arg(long, value_name = "FILE")]
    pub pred: PathBuf,
    /// Ground-truth poses in pose-record format
    #[arg(long, value_name = "FILE")]
    pub gt: PathBuf,
    /// Folder for summary.csv, samples.csv and cdf.csv
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PoiQueryArgs {
    /// Plan row of the camera, in pixels
    #[arg(long)]
    pub row: f64,
    /// Plan column of the camera, in pixels
    #[arg(long)]
    pub col: f64,
    /// Heading in degrees, 0 along +column, clockwise positive
    #[arg(long, allow_negative_numbers = true)]
    pub heading: f64,
    /// Search radius in meters
    #[arg(long)]
    pub radius: f64,
    /// Field of view in degrees; 360 disables the angular filter
    #[arg(long, default_value_t = 360.0)]
    pub fov: f64,
}

#[derive(Debug, Args)]
pub struct PlotPathArgs {
    /// Registered model folder
    #[arg(long, value_name = "DIR")]
    pub model: PathBuf,
    /// Output CSV (stdout when omitted)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Model folder or a single cameras.bin, images.bin or points3D.bin
    #[arg(value_name = "PATH")]
    pub path: PathBuf,
    /// Also list every 2D observation and track element
    #[arg(long)]
    pub verbose: bool,
}

/// Failure category; each maps to one exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Io,
    Config,
    Parse,
    Numerical,
    Executor,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Io => 1,
            Category::Config => 2,
            Category::Parse => 3,
            Category::Numerical => 4,
            Category::Executor => 5,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Category::Io => "io",
            Category::Config => "config",
            Category::Parse => "parse",
            Category::Numerical => "numerical",
            Category::Executor => "executor",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

impl CliError {
    pub fn new(category: Category, message: impl Into<String>) -> Self {
        Self {
            category,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Category::Config, message)
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        // unreadable inputs count as parse failures
        Self::new(Category::Parse, e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let category = match &e {
            PipelineError::Precondition(_) => Category::Config,
            PipelineError::Executor(_) | PipelineError::ReconstructionFailed { .. } => Category::Executor,
            PipelineError::DensificationExhausted { .. } | PipelineError::Registration(_) => Category::Numerical,
            PipelineError::Format(_) => Category::Parse,
            PipelineError::Io { .. } => Category::Io,
        };
        Self::new(category, e.to_string())
    }
}

impl From<PoiError> for CliError {
    fn from(e: PoiError) -> Self {
        let category = match &e {
            PoiError::Load { .. } | PoiError::DimensionMismatch { .. } | PoiError::UnknownLabel { .. } | PoiError::Invalid(_) => {
                Category::Parse
            }
            PoiError::InvalidQuery(_) => Category::Config,
            PoiError::UndefinedHeading | PoiError::OutOfBounds { .. } => Category::Numerical,
        };
        Self::new(category, e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        let category = match &e {
            EvalError::InvalidScale(_) | EvalError::InvalidK | EvalError::InvalidGrid(_) => Category::Config,
            EvalError::MissingGroundTruth(_) | EvalError::EmptySamples => Category::Parse,
            EvalError::DescriptorDimension { .. } | EvalError::EmptyDatabase => Category::Numerical,
        };
        Self::new(category, e.to_string())
    }
}

/// Parses `args`, runs the subcommand and returns the process exit code.
/// Normal output goes to `out`; error lines go to stderr.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {}", e.category.label(), e.message);
            e.category.exit_code()
        }
    }
}

fn resolve_config(g: &GlobalArgs) -> Result<Config, CliError> {
    let mut cfg = Config::load(g.config.as_deref(), &g.set).map_err(CliError::config)?;
    if let Some(f) = &g.floor {
        cfg.floor = f.clone();
    }
    if let Some(j) = g.jobs {
        cfg.jobs = Some(j);
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(CliError::config)?;
    Ok(cfg)
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = resolve_config(&cli.global)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs())
        .build()
        .map_err(|e| CliError::config(format!("cannot start {} worker(s): {e}", cfg.jobs())))?;
    // output is buffered so the worker pool never touches the caller's writer
    let mut buf: Vec<u8> = Vec::new();
    let result = pool.install(|| {
        let w = &mut buf;
        match &cli.command {
            Command::Sample(a) => commands::sample(&cfg, a, w),
            Command::Annotate(a) => commands::annotate(&cfg, a, w),
            Command::Export(a) => commands::export(&cfg, a, w),
            Command::Evaluate(a) => commands::evaluate(&cfg, a, w),
            Command::PoiQuery(a) => commands::poi_query(&cfg, a, w),
            Command::PlotPath(a) => commands::plot_path(&cfg, a, w),
            Command::Inspect(a) => commands::inspect(a, w),
        }
    });
    out.write_all(&buf)
        .and_then(|_| out.flush())
        .map_err(|e| CliError::new(Category::Io, e.to_string()))?;
    result
}

/// Entry point for the binary.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    run(std::env::args_os(), &mut lock)
}
