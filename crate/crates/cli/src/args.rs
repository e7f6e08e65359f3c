use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::LevelFilter;
use protoform::editmodel::ContextRadius;
use protoform::em::Mode;

/// Unsupervised protoform reconstruction from cognate sets.
#[derive(Debug, Parser)]
#[command(name = "protoform", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads (default: one per processor).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Only print warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    /// Print per-epoch diagnostics.
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

impl Cli {
    pub fn verbosity(&self) -> LevelFilter {
        match (self.quiet, self.verbose) {
            (true, _) => LevelFilter::Warn,
            (false, true) => LevelFilter::Debug,
            (false, false) => LevelFilter::Info,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic language family with known ancestors.
    Generate(GenerateArgs),
    /// Run EM and write checkpoints, a manifest and reconstructions.
    Train(TrainArgs),
    /// Decode reconstructions from a saved checkpoint.
    Reconstruct(ReconstructArgs),
    /// Score reconstructions against the gold column of a dataset.
    Evaluate(EvaluateArgs),
    /// Sweep epochs-per-M-step or context radius over several seeds.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Output directory; receives `dataset.tsv` and `proto_corpus.txt`.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Number of proto words.
    #[arg(long, default_value_t = 500)]
    pub words: usize,
    /// Number of daughter branches (1 to 4, taken from the default benchmark).
    #[arg(long, default_value_t = 4)]
    pub branches: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args, Clone)]
pub struct RunArgs {
    /// Cognate table (TSV).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Proto-language word list for the bigram prior (one word per line).
    /// Defaults to the dataset's gold column.
    #[arg(long)]
    pub prior_corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub prior_alpha: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Neural)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 10)]
    pub em_iterations: usize,
    /// Training epochs per M-step (`n`).
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    /// Context radius `k` of the neural model: an integer or `inf`.
    #[arg(long, default_value = "inf")]
    pub context_radius: ContextRadius,
    #[arg(long, default_value_t = 20)]
    pub mh_rounds: usize,
    #[arg(long, default_value_t = 3)]
    pub bootstrap_iterations: usize,
    #[arg(long, default_value_t = 50)]
    pub decode_rounds: usize,
    #[arg(long, default_value_t = 0.01)]
    pub learning_rate: f64,
    /// Edit events per minibatch.
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 50)]
    pub embedding_dim: usize,
    #[arg(long, default_value_t = 50)]
    pub hidden_dim: usize,
    /// Window radius of the classical multinomial model.
    #[arg(long, default_value_t = 1)]
    pub classical_radius: usize,
    #[arg(long, default_value_t = 0.1)]
    pub classical_alpha: f64,
    /// Decode after every iteration and log the distance to gold.
    #[arg(long)]
    pub decode_each_iteration: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Neural,
    Classical,
    Untrained,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Neural => Mode::Neural,
            ModeArg::Classical => Mode::Classical,
            ModeArg::Untrained => Mode::Untrained,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Output directory for the manifest, checkpoints and reconstructions.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output reconstruction table.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub decode_rounds: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Dataset carrying a gold (`*`) column.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub reconstructions: PathBuf,
    /// Optional JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    /// Epochs per M-step (`n`).
    Epochs,
    /// Context radius (`k`).
    Radius,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum)]
    pub param: SweepParam,
    /// Comma-separated settings, e.g. `5,10,20,30` or `0,2,5,10,inf`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
    /// Comma-separated seeds; the bootstrap is shared per seed.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}
