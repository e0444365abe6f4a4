use std::path::PathBuf;

use biasrank::Variant;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "biasrank", version, about = "Train, apply and explain a pairwise text-bias model")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Word-embedding table (text format, optional `count dim` header).
    #[arg(long, global = true, value_name = "PATH")]
    pub embeddings: Option<PathBuf>,
    /// Model file to read (or, for `train`, the default output).
    #[arg(long, global = true, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Seed for every pseudorandom choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for featurization and scoring (default: all cores).
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    /// Print nothing but the primary data output.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build before/after pairs around POV-related edits.
    ExtractPairs(ExtractPairsArgs),
    /// Split pairs into train/valid/test sets, keeping articles together.
    Split(SplitArgs),
    /// Fit a model on training pairs.
    Train(TrainArgs),
    /// Pairwise accuracy of a model or a baseline.
    Eval(EvalArgs),
    /// Bias score of every document in a corpus.
    Score(ScoreArgs),
    /// Per-word contributions to one document's score.
    Explain(ExplainArgs),
    /// Words ranked by corpus-level bias score.
    TopWords(TopWordsArgs),
    /// Percentile of each document within its group and mean percentile per source.
    RankGroups(RankGroupsArgs),
    /// Scores over time, with rank correlation against quality scores.
    Timeline(TimelineArgs),
    /// Histogram and summary of scores, optionally per group.
    Distribution(DistributionArgs),
    /// Label revisions POV/NPOV from their share of POV-related comments.
    LabelRevisions(LabelArgs),
}

#[derive(Debug, Args)]
pub struct ExtractPairsArgs {
    /// Revision records, one JSON object per line, sorted by time per article.
    #[arg(long, value_name = "PATH", required_unless_present = "fetch", conflicts_with = "fetch")]
    pub revisions: Option<PathBuf>,
    /// Fetch the revision history of this article title.
    #[arg(long, value_name = "TITLE", requires = "endpoint")]
    pub fetch: Option<String>,
    #[command(flatten)]
    pub fetch_opts: FetchOpts,
    /// POV comment patterns, one regex per line (default: bundled set).
    #[arg(long, value_name = "PATH")]
    pub regexes: Option<PathBuf>,
    #[arg(long, default_value_t = biasrank::ingest::DEFAULT_MIN_DISTANCE)]
    pub min_distance: usize,
    /// Output pairs file (default: stdout).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FetchOpts {
    /// MediaWiki API endpoint, e.g. https://en.wikipedia.org/w/api.php.
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,
    #[arg(long, value_name = "STRING")]
    pub user_agent: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub requests_per_second: f64,
    #[arg(long, default_value_t = 3)]
    pub max_retries: u32,
    #[arg(long, value_name = "N")]
    pub max_revisions: Option<usize>,
    /// Continuation checkpoint; an existing one is resumed.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Also save the fetched revisions to this file.
    #[arg(long, value_name = "PATH")]
    pub save_revisions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long, value_name = "PATH")]
    pub pairs: PathBuf,
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_value = "0.9,0.05,0.05")]
    pub ratios: Vec<f64>,
    /// Files are written as PREFIX{train,valid,test}.jsonl.
    #[arg(long, value_name = "PREFIX")]
    pub out_prefix: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Linear,
    Quadratic,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Linear => Variant::Linear,
            VariantArg::Quadratic => Variant::Quadratic,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "PATH")]
    pub train: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub valid: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "quadratic")]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    /// Visit training pairs in file order every epoch.
    #[arg(long)]
    pub no_shuffle: bool,
    /// Model output (default: the global --model path).
    #[arg(long, value_name = "MODEL")]
    pub out: Option<PathBuf>,
    /// Per-epoch log (default: MODEL.log.jsonl).
    #[arg(long, value_name = "PATH")]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Random,
    Lexicon,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "PATH")]
    pub pairs: PathBuf,
    /// Evaluate a baseline instead of the --model.
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    /// Word list for the lexicon baseline (default: bundled starter list).
    #[arg(long, value_name = "PATH")]
    pub lexicon: Option<PathBuf>,
    /// Per-pair predictions as CSV.
    #[arg(long, value_name = "PATH")]
    pub predictions: Option<PathBuf>,
    /// Report output (default: stdout).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Corpus records with `doc_id` and `text`.
    #[arg(long, value_name = "PATH")]
    pub docs: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    /// Plain-text document; `-` reads standard input.
    #[arg(long, value_name = "PATH")]
    pub doc: PathBuf,
    /// Show at most this many words.
    #[arg(long)]
    pub top: Option<usize>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TopWordsArgs {
    /// Corpus defining the mean document vector (default: the one stored in the model).
    #[arg(long, value_name = "PATH")]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long)]
    pub ascending: bool,
    /// Average raw rather than normalized document vectors.
    #[arg(long)]
    pub raw_mean: bool,
    /// Write a copy of the model with the corpus mean stored in it.
    #[arg(long, value_name = "PATH")]
    pub save_model: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankGroupsArgs {
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
    /// Document ids to leave out, one per line.
    #[arg(long, value_name = "PATH")]
    pub exclude: Option<PathBuf>,
    /// Per-document percentiles (default: stdout).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Per-source mean percentiles (default: stderr, unless --quiet).
    #[arg(long, value_name = "PATH")]
    pub sources_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TimelineArgs {
    /// Corpus records with `timestamp` and optionally `quality_score`.
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// JSON summary with the rank correlation.
    #[arg(long, value_name = "PATH")]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GroupField {
    Group,
    Source,
    Label,
}

#[derive(Debug, Args)]
pub struct DistributionArgs {
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    pub bins: u32,
    /// Histogram per value of this field instead of over the whole corpus.
    #[arg(long, value_enum)]
    pub by: Option<GroupField>,
    /// Histogram output (default: stdout).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Per-group mean, standard deviation and quartiles.
    #[arg(long, value_name = "PATH")]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// Corpus records carrying `c_r` and `k`.
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}
