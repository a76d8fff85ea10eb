//! Command-line interface definition.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use stance_core::codec::Paradigm;

#[derive(Debug, Parser)]
#[command(
    name = "stance",
    version,
    about = "Rationale-distilled stance detection: ingest, elicit, train, evaluate, sweep, report"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse raw tab-separated stance files, build the train/validation
    /// split, and write JSON-lines partitions plus per-topic statistics.
    Ingest(CommonArgs),
    /// Elicit label-conditioned rationales into the JSON-lines cache.
    Elicit(CommonArgs),
    /// Zero-shot classification of the test set through the completion
    /// service (or the deterministic mock).
    Baseline(CommonArgs),
    /// Train one configuration and evaluate it on the test set.
    Train(CommonArgs),
    /// Evaluate a saved checkpoint on the test set.
    Eval(EvalArgs),
    /// Train and evaluate across an alpha grid (MTL only).
    SweepAlpha(CommonArgs),
    /// Train and evaluate across a training-size grid for one or all
    /// paradigms.
    SweepSize(CommonArgs),
    /// Render stored results as Table-style markdown and plot CSV.
    Report(ReportArgs),
    /// Write the synthetic fixture corpus (official file layout, published
    /// per-topic label counts) for offline experimentation.
    Fixture(FixtureArgs),
}

#[derive(Debug, Args, Default, Clone)]
pub struct CommonArgs {
    /// Flat key-value configuration file; command-line flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Data location: a directory with train/test files or a split .jsonl.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Rationale cache (JSON-lines).
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Output tree root (default `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exact run directory (overrides the derived one; sweeps resume here).
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    #[arg(long)]
    pub paradigm: Option<Paradigm>,
    /// Stance-task weight for MTL.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Alpha grid override for sweep-alpha, e.g. `0.2,0.8`.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Fraction grid override for sweep-size, e.g. `0.1,0.5,1.0`.
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
    /// Seeds for repeated runs, e.g. `13,42,87`.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Single-seed override (first seed when both are given).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Fraction of the training pool moved to validation (default 0.1).
    #[arg(long)]
    pub val_fraction: Option<f64>,
    /// Backend identifier, e.g. `tiny` or `tiny-d16-h48`.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub max_input_len: Option<usize>,
    #[arg(long)]
    pub max_gen_len: Option<usize>,
    /// Use the instruction-block input format.
    #[arg(long)]
    pub instructed_format: bool,
    /// Use the deterministic offline mock instead of a remote service.
    #[arg(long)]
    pub mock_llm: bool,
    /// Parallel workers for elicitation requests and sweep cells.
    #[arg(long)]
    pub workers: Option<usize>,
    /// End-of-sentence separator between topic and comment.
    #[arg(long)]
    pub separator: Option<String>,
    /// Completion service endpoint URL.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Completion service model name.
    #[arg(long)]
    pub model: Option<String>,
    /// Environment variable holding the service API key.
    #[arg(long)]
    pub api_key_env: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Checkpoint file written by `train` (or a sweep cell).
    #[arg(long)]
    pub checkpoint: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Stored result files (sweep_result.json, eval/baseline report .json).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output format.
    #[arg(long, default_value = "both")]
    pub format: ReportFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Both,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    /// Directory to write train.txt and test.txt into.
    #[arg(long, default_value = "data/fixture")]
    pub out: PathBuf,
}
