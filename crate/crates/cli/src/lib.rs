//! Command-line front end for policylens. Every subcommand stages its outputs
//! in a temporary directory and moves them into `--out-dir` only after the
//! whole computation has succeeded, together with a run manifest.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

mod commands;
pub mod manifest;
pub mod staging;
pub mod stages;

pub use manifest::{FileDigest, OutputDigest, RunManifest};

/// Artifacts written by `pipeline`, in manifest order.
pub const PIPELINE_ARTIFACTS: [&str; 9] = [
    "classified.csv",
    "theme_counts.csv",
    "rankings.csv",
    "boxplots.svg",
    "ca_coords.csv",
    "ca_summary.csv",
    "biplot.svg",
    "regression.csv",
    "coef_plot.svg",
];

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "policylens", version, about = "Text-based climate policy analysis")]
pub struct Cli {
    /// Harmonization config (indicator transforms, first analysis year).
    #[arg(long, global = true, env = "POLICYLENS_CONFIG")]
    pub config: Option<PathBuf>,

    /// First year of the analysis window; overrides the config.
    #[arg(long, global = true)]
    pub min_year: Option<i32>,

    /// Directory receiving all outputs.
    #[arg(long, global = true, default_value = "policylens-out")]
    pub out_dir: PathBuf,

    /// Suppress progress messages on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the theme classifier and evaluate it on a held-out split.
    Train(TrainArgs),
    /// Attach predicted labels to a policy corpus.
    Classify(ClassifyArgs),
    /// Score predicted labels against gold labels.
    Evaluate(EvaluateArgs),
    /// Theme counts, z-score rankings and boxplots.
    Indicators(IndicatorsArgs),
    /// Correspondence analysis of countries by theme.
    Ca(CaArgs),
    /// Two-way fixed-effects regressions of indicators on theme counts.
    Panel(PanelArgs),
    /// Run every stage from raw policies and indicators.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Where to write the model; defaults to `<out-dir>/model.txt`.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub min_df: usize,
    #[arg(long, default_value_t = 20_000)]
    pub max_terms: usize,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Held-out fraction.
    #[arg(long, default_value_t = 0.2)]
    pub split: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Output CSV; defaults to `<out-dir>/classified.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Corpus with gold labels, and predicted labels unless `--model` is given.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Score documents with this model; also enables PR curves.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct IndicatorsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Countries ranked per theme.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct CaArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Countries kept by total document count.
    #[arg(long, default_value_t = 50)]
    pub top_n: usize,
    /// Countries kept regardless of rank.
    #[arg(long, value_delimiter = ',', default_value = "CAN,FRA,DEU,ITA,JPN,GBR,USA")]
    pub always_include: Vec<String>,
}

#[derive(Debug, Args)]
pub struct PanelArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub wdi: PathBuf,
    /// Outcome indicator codes; defaults to every configured indicator.
    #[arg(long, value_delimiter = ',')]
    pub outcomes: Vec<String>,
    /// Use pooled z-scores of the theme counts as regressors.
    #[arg(long)]
    pub standardize: bool,
    /// Drop countries observed in a single year.
    #[arg(long)]
    pub drop_singletons: bool,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub policies: PathBuf,
    #[arg(long)]
    pub wdi: PathBuf,
    /// Pretrained model; without it a model is trained on the gold labels.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    commands::run(cli)
}
