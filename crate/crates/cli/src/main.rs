//! `mimir`: crawl, deduplicate, map and classify a hidden-service corpus
//! from the command line. Every subcommand is a thin orchestration over
//! one library module, takes its defaults from an optional TOML config
//! file (flags override, overrides are logged), and appends a manifest
//! line recording exactly what ran. Exit codes: 0 success, 1 domain
//! error, 2 usage error.

mod commands;
mod config;
mod manifest;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use config::Config;
use std::fmt;
use std::path::PathBuf;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation — the message names the offending flag. Exit 2.
    Usage(String),
    /// Well-formed invocation that failed. Exit 1.
    Domain(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Domain(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "mimir", version, about = "Hidden-service crawling and analysis pipeline")]
struct Cli {
    /// TOML configuration file; command-line flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine keywords, query engine fixtures and merge manual seeds
    Seed(SeedArgs),
    /// Breadth-first landing-page crawl over a pluggable transport
    Crawl(CrawlArgs),
    /// Cluster near-identical pages under earliest-crawled representatives
    Dedup(DedupArgs),
    /// Build the deduplicated link graph and its component/ablation reports
    Graph(GraphArgs),
    /// Train the text classifier on labeled documents
    ClassifyTrain(ClassifyTrainArgs),
    /// Classify crawled pages with a trained model
    ClassifyPredict(ClassifyPredictArgs),
    /// Scan pages for prohibition statements around lexicon keywords
    Detect(DetectArgs),
    /// Benchmark the mirror detector against baseline hashes
    BenchHash(BenchHashArgs),
    /// Generate a synthetic fixture corpus with mirror ground truth
    Synthgen(SynthgenArgs),
}

#[derive(Args)]
struct SeedArgs {
    /// Titles corpus, one per line; omitted, the built-in keyword list is used
    #[arg(long)]
    titles: Option<PathBuf>,
    /// How many keywords to mine from the titles corpus
    #[arg(long, default_value_t = 10)]
    keywords: usize,
    /// Directory with one subdirectory of canned results per engine
    #[arg(long)]
    engines_dir: PathBuf,
    /// Comma-separated engine identifiers under --engines-dir
    #[arg(long)]
    engines: String,
    /// Extra seed URLs, one per line, merged with manual provenance
    #[arg(long)]
    manual: Option<PathBuf>,
    /// Seed list to write (JSON lines)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CrawlArgs {
    /// Seed list: JSON lines from `seed`, or bare URLs one per line
    #[arg(long)]
    seeds: PathBuf,
    /// Concurrent fetch workers
    #[arg(long)]
    workers: Option<usize>,
    /// Per-request timeout in seconds
    #[arg(long)]
    timeout: Option<u64>,
    /// Attempt budget per host before it is marked unreachable
    #[arg(long)]
    max_attempts: Option<u8>,
    /// Transport: fixture | proxy
    #[arg(long)]
    transport: Option<String>,
    /// host:port of the HTTP forwarding proxy (env MIMIR_PROXY overrides)
    #[arg(long)]
    proxy_endpoint: Option<String>,
    /// Root directory of the fixture corpus
    #[arg(long)]
    fixture_root: Option<PathBuf>,
    /// Timestamp source: auto | fixed | system
    #[arg(long)]
    clock: Option<String>,
    /// Resume from the snapshot already at --out instead of starting fresh
    #[arg(long)]
    resume: bool,
    /// Snapshot to write (JSON lines)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DedupArgs {
    /// Crawl snapshot to cluster
    #[arg(long)]
    snapshot: PathBuf,
    /// Scheme,content weight split, e.g. 0.3,0.7 (must sum to 1)
    #[arg(long)]
    weights: Option<String>,
    /// Mirror decision threshold in [0, 1]
    #[arg(long)]
    threshold: Option<f64>,
    /// Cluster assignment CSV to write
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GraphArgs {
    /// Crawl snapshot to map
    #[arg(long)]
    snapshot: PathBuf,
    /// Cluster assignment CSV from `dedup`; omitted, every page stands alone
    #[arg(long)]
    clusters: Option<PathBuf>,
    /// Seed list with provenance, enabling the seed-ablation report
    #[arg(long)]
    seeds: Option<PathBuf>,
    /// Prediction CSV from `classify-predict`, attaching node categories
    #[arg(long)]
    categories: Option<PathBuf>,
    /// Report directory to write (nodes, edges, components, ablation)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyTrainArgs {
    /// Labeled documents: JSON lines with "text" and "label" fields
    #[arg(long)]
    data: PathBuf,
    /// Per-class sample cap enforced by bootstrap balancing
    #[arg(long)]
    cap: Option<usize>,
    /// Cross-validation folds
    #[arg(long)]
    folds: Option<usize>,
    /// Random seed for balancing and fold shuffling
    #[arg(long)]
    seed: Option<u64>,
    /// Penalty: none | l1 | l2 | elasticnet:MIX
    #[arg(long)]
    penalty: Option<String>,
    /// Inverse regularization strength
    #[arg(long)]
    c: Option<f64>,
    /// Strategy: multinomial | one_vs_one
    #[arg(long)]
    strategy: Option<String>,
    /// Grid-search penalty and C instead of using them as given
    #[arg(long)]
    grid_search: Option<bool>,
    /// Optimizer iteration budget
    #[arg(long)]
    max_iters: Option<usize>,
    /// F-score beta used for model selection
    #[arg(long)]
    beta: Option<f64>,
    /// Comma-separated class list; omitted, classes are inferred from the data
    #[arg(long)]
    classes: Option<String>,
    /// Model file to write; the fold report prints to stdout as CSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyPredictArgs {
    /// Trained model from `classify-train`
    #[arg(long)]
    model: PathBuf,
    /// Crawl snapshot to classify
    #[arg(long)]
    snapshot: PathBuf,
    /// Prediction CSV to write (host, category, probability, reliability)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    /// Sectioned lexicon file
    #[arg(long)]
    lexicon: PathBuf,
    /// Crawl snapshot to scan
    #[arg(long)]
    snapshot: PathBuf,
    /// Only scan pages predicted as this category (needs --predictions)
    #[arg(long)]
    category: Option<String>,
    /// Prediction CSV from `classify-predict`
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Verdict CSV to write
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchHashArgs {
    /// Crawl snapshot holding the benchmark pages
    #[arg(long)]
    snapshot: PathBuf,
    /// Ground-truth labels CSV (host,cluster_id,...) from `synthgen`
    #[arg(long)]
    pairs: PathBuf,
    /// Cap on positive pairs (an equal number of negatives is sampled); 0 = all
    #[arg(long, default_value_t = 0)]
    max_pairs: usize,
    /// Random seed for negative-pair sampling
    #[arg(long)]
    seed: Option<u64>,
    /// Scheme,content weight split for the hybrid detector
    #[arg(long)]
    weights: Option<String>,
    /// Mirror decision threshold for the hybrid detector
    #[arg(long)]
    threshold: Option<f64>,
    /// Also print the threshold sweep table to stdout
    #[arg(long)]
    sweep: bool,
    /// Benchmark CSV to write
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthgenArgs {
    /// Named spec; only "default" is built in
    #[arg(long)]
    spec: Option<String>,
    /// Unique sites to generate
    #[arg(long)]
    n_uniques: Option<usize>,
    /// Mean mirrors per unique (geometric)
    #[arg(long)]
    fanout: Option<f64>,
    /// Topology: chain | tree | clusters
    #[arg(long)]
    topology: Option<String>,
    /// Mutation magnitude in (0, 0.5]
    #[arg(long)]
    magnitude: Option<f64>,
    /// Fraction of hosts that fail a few times before answering
    #[arg(long)]
    flaky: Option<f64>,
    /// Fraction of mirror hosts that never answer
    #[arg(long)]
    dead: Option<f64>,
    /// Generator seed
    #[arg(long)]
    seed: Option<u64>,
    /// Corpus directory to write (corpus/, labels.csv, seeds.txt)
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Seed(args) => commands::seed(config, &args),
        Command::Crawl(args) => commands::crawl(config, &args),
        Command::Dedup(args) => commands::dedup(config, &args),
        Command::Graph(args) => commands::graph(config, &args),
        Command::ClassifyTrain(args) => commands::classify_train(config, &args),
        Command::ClassifyPredict(args) => commands::classify_predict(config, &args),
        Command::Detect(args) => commands::detect(config, &args),
        Command::BenchHash(args) => commands::bench_hash(config, &args),
        Command::Synthgen(args) => commands::synthgen(config, &args),
    }
}
