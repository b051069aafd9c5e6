//! `stereo-eeg` command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
//! The default worker thread count comes from `STEREO_EEG_THREADS`.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use stereo_eeg::learn::Classifier;

use config::Profile;

pub const THREADS_ENV: &str = "STEREO_EEG_THREADS";

#[derive(Debug, Parser)]
#[command(name = "stereo-eeg", version, about = "EEG band-power pipeline for 2D vs 3D video viewing")]
pub struct Cli {
    /// Worker threads (default: $STEREO_EEG_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic 2D/3D recordings.
    Synth(SynthArgs),
    /// Check recordings against the paradigm invariants.
    Validate(ValidateArgs),
    /// Band-difference matrix and dominant-band election.
    Bandselect(BandselectArgs),
    /// Epoch features for one subject, split into train.csv and test.csv.
    Features(FeaturesArgs),
    /// Tune and fit a classifier on a feature CSV.
    Train(TrainArgs),
    /// Per-channel evaluation, ranking and combination search.
    Evaluate(EvaluateArgs),
    /// Turn results.json into the report bundle.
    Report(ReportArgs),
    /// Run everything from recordings (or a synthetic profile) to reports.
    All(AllArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "paper")]
    pub profile: Profile,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub subjects: usize,
    /// Output directory; recordings go to <out>/<subject>/{2D,3D}/.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Recording manifests to check.
    #[arg(required = true)]
    pub manifests: Vec<PathBuf>,
}

/// Recording inputs: repeated 2D/3D manifest pairs, one pair per subject.
#[derive(Debug, Args, Clone)]
pub struct ManifestArgs {
    #[arg(long = "manifest-2d")]
    pub manifest_2d: Vec<PathBuf>,
    #[arg(long = "manifest-3d")]
    pub manifest_3d: Vec<PathBuf>,
}

/// Synthetic input, used when no manifests are given.
#[derive(Debug, Args, Clone)]
pub struct SynthInputArgs {
    #[arg(long = "synth-profile", value_enum)]
    pub synth_profile: Option<Profile>,
    /// Seed for synthesis; also the default split and CV seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub subjects: usize,
}

#[derive(Debug, Args, Clone, Default)]
pub struct SelectionArgs {
    /// |2D − 3D| threshold in percentage points.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long = "n-select")]
    pub n_select: Option<usize>,
    /// STFT window length in samples.
    #[arg(long)]
    pub window: Option<usize>,
    /// STFT hop in samples.
    #[arg(long)]
    pub hop: Option<usize>,
    /// Butterworth order for both phases.
    #[arg(long)]
    pub order: Option<usize>,
    /// Notch −3 dB bandwidth in Hz.
    #[arg(long = "notch-bandwidth")]
    pub notch_bandwidth: Option<f64>,
    /// Skip the 50 Hz notch.
    #[arg(long = "no-notch")]
    pub no_notch: bool,
}

#[derive(Debug, Args, Clone, Default)]
pub struct EpochArgs {
    /// Feature bands, e.g. "delta,theta" (default: elected dominant bands).
    #[arg(long, value_delimiter = ',')]
    pub bands: Option<Vec<String>>,
    #[arg(long = "split-seed")]
    pub split_seed: Option<u64>,
    /// First epochs of each class train, the rest test.
    #[arg(long)]
    pub chronological: bool,
    /// Absolute band powers instead of percentages.
    #[arg(long = "absolute-power")]
    pub absolute_power: bool,
    #[arg(long = "train-per-class")]
    pub train_per_class: Option<usize>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct CvArgs {
    /// Cross-validation folds.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long = "cv-seed")]
    pub cv_seed: Option<u64>,
    #[arg(long = "c-grid", value_delimiter = ',')]
    pub c_grid: Option<Vec<f64>>,
    /// Multipliers of the median pairwise distance forming the σ grid.
    #[arg(long = "sigma-scales", value_delimiter = ',')]
    pub sigma_scales: Option<Vec<f64>>,
    #[arg(long = "component-grid", value_delimiter = ',')]
    pub component_grid: Option<Vec<usize>>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct RankArgs {
    #[arg(long = "rank-threshold")]
    pub rank_threshold: Option<f64>,
    #[arg(long = "compromise-margin")]
    pub compromise_margin: Option<f64>,
    /// Permute labels within each partition (chance-level control).
    #[arg(long = "shuffle-labels")]
    pub shuffle_labels: bool,
}

#[derive(Debug, Args)]
pub struct BandselectArgs {
    #[command(flatten)]
    pub manifests: ManifestArgs,
    #[command(flatten)]
    pub selection: SelectionArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also dump each channel's trial-averaged spectrogram as CSV.
    #[arg(long = "dump-spectrogram")]
    pub dump_spectrogram: bool,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub manifests: ManifestArgs,
    /// Channels, comma separated (default: all).
    #[arg(long)]
    pub channels: Option<String>,
    /// Selection JSON from `bandselect` supplying the bands.
    #[arg(long)]
    pub selection: Option<PathBuf>,
    #[command(flatten)]
    pub selection_args: SelectionArgs,
    #[command(flatten)]
    pub epoch: EpochArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training feature CSV.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Optional test feature CSV to score after fitting.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, value_parser = parse_classifier)]
    pub classifier: Classifier,
    #[command(flatten)]
    pub cv: CvArgs,
    #[arg(long = "model-out")]
    pub model_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub manifests: ManifestArgs,
    #[command(flatten)]
    pub synth: SynthInputArgs,
    #[command(flatten)]
    pub selection: SelectionArgs,
    #[command(flatten)]
    pub epoch: EpochArgs,
    #[command(flatten)]
    pub cv: CvArgs,
    #[command(flatten)]
    pub rank: RankArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AllArgs {
    #[command(flatten)]
    pub eval: EvaluateArgs,
    /// Also write synthetic recordings under <out>/recordings.
    #[arg(long = "write-recordings")]
    pub write_recordings: bool,
}

fn parse_classifier(s: &str) -> Result<Classifier, String> {
    s.parse().map_err(|e: stereo_eeg::Error| e.to_string())
}

/// Failure of a subcommand, mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Stage {
        module: &'static str,
        source: stereo_eeg::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Stage { source, .. } => match source {
                stereo_eeg::Error::Numerical(_) => 3,
                _ => 2,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Stage { module, source } => write!(f, "{module}: {source}"),
        }
    }
}

impl std::error::Error for CliError {}

pub(crate) fn stage(module: &'static str) -> impl Fn(stereo_eeg::Error) -> CliError {
    move |source| CliError::Stage { module, source }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if let Some(n) = flag {
        return if n == 0 {
            Err(CliError::Usage("--threads must be ≥ 1".into()))
        } else {
            Ok(Some(n))
        };
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();

    let result = thread_count(cli.threads).and_then(|threads| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
        pool.install(|| commands::dispatch(cli.command))
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
