//! `newsbias`: one binary driving every workflow, from corpus ingestion to
//! the annotation service.

mod commands;
mod config;
mod error;

use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use newsbias_core::corpus::Side;
use newsbias_core::eval::TaskKind;
use newsbias_core::lm::{SamplingParams, DEFAULT_DISCOUNT, DEFAULT_ORDER};
use newsbias_core::pipeline::Generator;

#[derive(Debug, Parser)]
#[command(name = "newsbias", version, about = "Biased news generation, scoring and detection workflows")]
pub struct Cli {
    /// Flat key = value file supplying defaults for any flag.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Output file or directory (per command).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct SamplingArgs {
    #[arg(long, default_value_t = 400)]
    pub max_len: usize,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// Number of candidates kept per step, or `none` for the full vocabulary.
    #[arg(long, default_value = "40", value_parser = parse_top_k)]
    pub top_k: TopK,
}

/// Candidate cut-off per sampling step; `None` keeps the full vocabulary.
#[derive(Debug, Clone, Copy)]
pub struct TopK(pub Option<usize>);

impl SamplingArgs {
    pub fn params(&self, rng_seed: u64) -> SamplingParams {
        SamplingParams { max_len: self.max_len, temperature: self.temperature, top_k: self.top_k.0, rng_seed }
    }
}

fn parse_top_k(s: &str) -> Result<TopK, String> {
    match s {
        "none" | "all" => Ok(TopK(None)),
        n => n.parse().map(|k| TopK(Some(k))).map_err(|e| format!("{e}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum KindArg {
    Turing,
    Bias,
    Both,
}

impl KindArg {
    pub fn kinds(self) -> Vec<TaskKind> {
        match self {
            KindArg::Turing => vec![TaskKind::Turing],
            KindArg::Bias => vec![TaskKind::Bias],
            KindArg::Both => vec![TaskKind::Turing, TaskKind::Bias],
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a CSV export into an article set (JSON lines).
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        label: Option<Side>,
        #[arg(long, default_value = ",")]
        delimiter: char,
        #[arg(long, default_value = ";")]
        author_delimiter: char,
        /// Column holding the article id; rows are numbered when `none`.
        #[arg(long, default_value = "id")]
        col_id: String,
        #[arg(long, default_value = "title")]
        col_headline: String,
        #[arg(long, default_value = "publication")]
        col_domain: String,
        #[arg(long, default_value = "author")]
        col_authors: String,
        #[arg(long, default_value = "date")]
        col_date: String,
        #[arg(long, default_value = "content")]
        col_body: String,
    },
    /// Write a planted two-sided synthetic corpus (left.jsonl, right.jsonl).
    Synth {
        #[arg(long, default_value_t = 500)]
        articles_per_side: usize,
        #[arg(long, default_value_t = 50)]
        planted: usize,
        #[arg(long, default_value_t = 0.2)]
        injection_rate: f64,
    },
    /// Seeded train/test split (train.jsonl, test.jsonl).
    Split {
        #[arg(long)]
        input: PathBuf,
        /// Fraction of articles held out.
        #[arg(long, default_value_t = 0.3, conflicts_with = "test_count")]
        test_fraction: f64,
        #[arg(long)]
        test_count: Option<usize>,
    },
    /// Train an n-gram language model on one or more article sets.
    TrainLm {
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        /// Article sets the vocabulary is built from (defaults to the inputs).
        #[arg(long)]
        vocab_from: Vec<PathBuf>,
        #[arg(long, default_value_t = 1)]
        min_count: u64,
        #[arg(long, default_value_t = DEFAULT_ORDER)]
        order: usize,
        #[arg(long, default_value_t = DEFAULT_DISCOUNT)]
        discount: f64,
        /// Train on field-encoded articles for conditional generation.
        #[arg(long)]
        fielded: bool,
        #[arg(long)]
        side: Option<Side>,
    },
    /// Perplexity of a model on an article set.
    Perplexity {
        #[arg(long, required_unless_present = "uniform_vocab")]
        model: Option<PathBuf>,
        #[arg(long, required_unless_present = "uniform_vocab")]
        input: Option<PathBuf>,
        /// Report the perplexity of a uniform model over this many tokens.
        #[arg(long)]
        uniform_vocab: Option<usize>,
    },
    /// Sample a continuation of a prompt.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "")]
        prompt: String,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Generate articles from seed articles, optionally scoring and
    /// partitioning them by side.
    Generate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        seeds: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value = "seeded")]
        generator: Generator,
        #[arg(long, default_value_t = 2)]
        seed_sentences: usize,
        /// Regressor used to validate and partition the output.
        #[arg(long)]
        scorer: Option<PathBuf>,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Discriminativeness ratio of every word between two article sets.
    Ratio {
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, default_value_t = 5)]
        min_count: u64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 10)]
        show: usize,
    },
    /// Fit the bias regressor on labeled articles.
    TrainScorer {
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        #[arg(long, default_value_t = 1e-3)]
        reg: f64,
        #[arg(long, default_value_t = 2)]
        min_df: usize,
        #[arg(long, default_value_t = 0.2)]
        holdout: f64,
    },
    /// Score a text or label every article of a set.
    Score {
        #[command(flatten)]
        scorer: ScorerArgs,
        #[arg(long, conflicts_with = "input")]
        text: Option<String>,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Mean |score| at increasing lede lengths.
    Granularity {
        #[command(flatten)]
        scorer: ScorerArgs,
        #[arg(long)]
        input: PathBuf,
    },
    /// Generate with both side models, validate, and report bias histograms.
    Campaign {
        #[arg(long)]
        left_model: PathBuf,
        #[arg(long)]
        right_model: PathBuf,
        #[arg(long)]
        scorer: PathBuf,
        /// One seed pool shared by both models.
        #[arg(long, required_unless_present_all = ["left_seeds", "right_seeds"], conflicts_with_all = ["left_seeds", "right_seeds"])]
        seeds: Option<PathBuf>,
        #[arg(long, requires = "right_seeds")]
        left_seeds: Option<PathBuf>,
        #[arg(long, requires = "left_seeds")]
        right_seeds: Option<PathBuf>,
        #[arg(long, default_value_t = 5000)]
        samples_per_side: usize,
        #[arg(long, default_value_t = 2)]
        seed_sentences: usize,
        #[arg(long, default_value = "seeded")]
        generator: Generator,
        #[arg(long, default_value_t = 2.0)]
        bin_width: f64,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Human vs machine detection benchmark with every detector fusion.
    Detect {
        /// Reference language model for the rank and perplexity detectors.
        #[arg(long)]
        model: PathBuf,
        /// Human-written article set.
        #[arg(long)]
        human: PathBuf,
        /// Generated articles (JSON lines).
        #[arg(long, required = true)]
        machine: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.7)]
        train_fraction: f64,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 5)]
        min_tokens: usize,
    },
    /// Equal error rate of a scored table (columns `score` and `label`).
    Eer {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "score")]
        score_column: String,
    },
    /// Train a fusion model on a detector-score table, or apply one.
    Fuse {
        /// Tab-separated table: one column per detector plus `label`.
        #[arg(long)]
        input: PathBuf,
        /// Apply this fusion model instead of training one.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = newsbias_core::detection::DEFAULT_FUSION_L2)]
        l2: f64,
    },
    /// Precompute annotation tasks for a list of annotators.
    MakeTasks {
        #[arg(long, required_if_eq_any = [("kind", "turing"), ("kind", "both")])]
        human: Option<PathBuf>,
        /// Generated articles; must be scored for bias tasks.
        #[arg(long)]
        generated: PathBuf,
        /// Comma-separated annotator ids.
        #[arg(long, value_delimiter = ',', required = true)]
        annotators: Vec<String>,
        #[arg(long, default_value_t = 10)]
        per_annotator: usize,
        #[arg(long, value_enum, default_value = "both")]
        kind: KindArg,
    },
    /// Selection rates and bias-identification metrics from a judgment log.
    Metrics {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        log: PathBuf,
    },
    /// Run the annotation web service.
    Serve {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        static_dir: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Debug, Args)]
pub struct ScorerArgs {
    /// Built-in regressor (JSON).
    #[arg(long, required_unless_present = "external_url")]
    pub scorer: Option<PathBuf>,
    /// Remote scoring endpoint; the regressor becomes the fallback.
    #[arg(long)]
    pub external_url: Option<String>,
    #[arg(long, default_value_t = 10.0)]
    pub external_timeout: f64,
    #[arg(long, default_value_t = 2)]
    pub external_retries: u32,
    #[arg(long, default_value = "text")]
    pub external_text_field: String,
    #[arg(long, default_value = "score")]
    pub external_score_field: String,
}

fn main() {
    // default SIGPIPE so piping into `head` ends the process without a panic
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let root = Cli::command();
    let argv: Vec<String> = std::env::args().collect();
    let argv = match config::merge(argv, &root) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("newsbias: {e}");
            std::process::exit(e.exit_code());
        }
    };
    let cli = match root.try_get_matches_from(argv).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if let Err(e) = commands::run(cli) {
        eprintln!("newsbias: {e}");
        std::process::exit(e.exit_code());
    }
}
