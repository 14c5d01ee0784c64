use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use persic_core::persic::FeatureAblationSpec;
use persic_core::ModelKind;

mod commands;
mod config;
mod logging;

/// Personality-aware content recommendation experiments.
///
/// Every command writes its outputs, a `config.resolved.json` snapshot and
/// a timestamped `run.log` into the output directory. Log verbosity on
/// stderr follows `PERSIC_LOG` (error, warn, info, debug, trace).
#[derive(Debug, Parser)]
#[command(name = "persic", version)]
pub struct Cli {
    /// JSON experiment config; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Top-level seed for data generation, splitting and training.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,

    /// Output directory (default: out/<command>).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Print machine-readable JSON on stdout instead of text.
    #[arg(long, global = true)]
    pub json: bool,

    /// Models trained at once by compare and ablate; 0 = one per core.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset bundle with planted trait signal.
    Synth(SynthArgs),
    /// Fit the text pipeline and write feature bundles for every user and post.
    Features(FeaturesArgs),
    /// Train one model on the training split and save a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the held-out split it was trained against.
    Eval(EvalArgs),
    /// Train PersiC once per user-feature subset and compare them.
    Ablate(AblateArgs),
    /// Train PersiC and the baselines and compare them.
    Compare(CompareArgs),
    /// Correlate trait poles with post concepts.
    Traits(TraitsArgs),
    /// Print dataset statistics.
    Stats(StatsArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Features(_) => "features",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Ablate(_) => "ablate",
            Command::Compare(_) => "compare",
            Command::Traits(_) => "traits",
            Command::Stats(_) => "stats",
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of users.
    #[arg(long)]
    pub users: Option<usize>,
    /// Number of brand posts.
    #[arg(long)]
    pub posts: Option<usize>,
    /// Length of each concept vector (at least 8).
    #[arg(long)]
    pub concepts: Option<usize>,
    /// Vocabulary size of the generated text.
    #[arg(long)]
    pub vocab: Option<usize>,
    /// Number of latent topics.
    #[arg(long)]
    pub topics: Option<usize>,
    /// Share of the preference driven by personality, in [0, 1].
    #[arg(long)]
    pub effect: Option<f64>,
    /// Expected fraction of user×post cells that are likes.
    #[arg(long)]
    pub density: Option<f64>,
    /// Randomness of likes given preferences, in [0, 1).
    #[arg(long)]
    pub noise: Option<f64>,
    /// Standard deviation of the noise on personality features.
    #[arg(long)]
    pub pers_noise: Option<f64>,
    /// Timeline posts per user.
    #[arg(long)]
    pub timeline_posts: Option<usize>,
    /// Externally liked posts per user.
    #[arg(long)]
    pub liked_posts: Option<usize>,
    /// Words per generated post.
    #[arg(long)]
    pub words: Option<usize>,
    /// Number of brands.
    #[arg(long)]
    pub brands: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset bundle directory.
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
    /// Output directory of a `features` run; fitted on the fly when absent.
    #[arg(long, value_name = "DIR")]
    pub features: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainingArgs {
    /// Epochs for every model.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// PersiC latent dimension.
    #[arg(long)]
    pub latent_dim: Option<usize>,
    /// Fraction of each user's likes used for training.
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Dataset bundle directory.
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
    /// Category lexicon JSON (default: the bundle's lexicon.json, else a demo lexicon).
    #[arg(long, value_name = "PATH")]
    pub lexicon: Option<PathBuf>,
    /// Number of LSA dimensions.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Model to train: mf, fm, neucf, bivae, pcd or persic.
    #[arg(long, default_value = "persic")]
    pub model: ModelKind,
    /// PersiC user features: onehot, posts, likes, posts+likes, posts+pers, posts+likes+pers.
    #[arg(long, default_value = "posts+likes+pers")]
    pub ablation: FeatureAblationSpec,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint written by `train`.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Ranking cutoffs, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub cutoffs: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Feature subsets to compare, comma separated (default: all six).
    #[arg(long, value_delimiter = ',')]
    pub ablations: Option<Vec<FeatureAblationSpec>>,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Models to compare, comma separated (default: all six).
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<ModelKind>>,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct TraitsArgs {
    /// Dataset bundle directory.
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
    /// Concepts listed per trait pole.
    #[arg(long, default_value_t = persic_core::eval::DEFAULT_TOP_N)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Dataset bundle directory.
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    logging::init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            logging::write_line(&format!("error: {e}"));
            for cause in e.chain().skip(1) {
                logging::write_line(&format!("  caused by: {cause}"));
            }
            ExitCode::FAILURE
        }
    }
}

/// The error chain joined with `: `, skipping causes a message already quotes.
fn one_line(e: &anyhow::Error) -> String {
    let mut line = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if line.contains(&msg) {
            continue;
        }
        if !line.is_empty() {
            line.push_str(": ");
        }
        line.push_str(&msg);
    }
    line.replace('\n', " ")
}
