//! `lori`: operator commands for every pipeline stage.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 runtime failure.

mod commands;
mod config;
mod error;
mod io;
mod lfspec;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lori_core::corpus::MicroLabel;
use lori_core::pipeline::BoundarySpec;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "lori", version, about = "Leadership evidence analysis for recommendation letters")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenerativeFlag {
    /// Deterministic offline agent, verifier and summariser.
    Doubles,
    /// A llama.cpp server reached over HTTP.
    Llama,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExtractorFlag {
    Auto,
    TextLayer,
    Ocr,
    Fixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendFlag {
    Lightweight,
    Lexicon,
    Transformer,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Store directory for `serve`.
    #[arg(long, global = true, env = "LORI_STORE")]
    pub store: Option<PathBuf>,
    /// Trained model directory; the bundled lexicon classifier otherwise.
    #[arg(long, global = true)]
    pub models: Option<PathBuf>,
    /// Prompt template directory; the bundled templates otherwise.
    #[arg(long, global = true)]
    pub prompts: Option<PathBuf>,
    /// Seed for every stochastic step; the profile's seed otherwise.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Use the `paper` profile of the config file.
    #[arg(long, global = true)]
    pub paper_config: bool,
    /// Config file replacing the bundled profiles.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    pub force: bool,
    /// Generative backend for extraction, verification and summaries.
    #[arg(long, global = true, value_enum, default_value_t = GenerativeFlag::Doubles)]
    pub generative: GenerativeFlag,
    /// Base URL of the llama.cpp server when `--generative llama`.
    #[arg(long, global = true, default_value = "http://127.0.0.1:8080")]
    pub llama_url: String,
    /// How document bytes become text.
    #[arg(long, global = true, value_enum, default_value_t = ExtractorFlag::Auto)]
    pub extractor: ExtractorFlag,
    /// More log output on stderr; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment documents into a corpus directory.
    Prep(PrepArgs),
    /// Compute linguistic feature vectors for every corpus sentence.
    Features(FeaturesArgs),
    /// Apply labeling functions and write the weakly labelled dataset.
    Weaklabel(WeaklabelArgs),
    /// Train a sentence classifier, optionally with a learning curve.
    Train(TrainArgs),
    /// Score predictions against reference labels.
    Eval(EvalArgs),
    /// Run micro-label phrase extraction over sentences.
    Extract(ExtractArgs),
    /// Produce the full applicant report for one document.
    Analyze(AnalyzeArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct PrepArgs {
    /// A document, or a directory of documents named `<applicant_id>.<ext>`.
    #[arg(long)]
    pub input: PathBuf,
    /// Applicant id for a single input document; the file stem otherwise.
    #[arg(long)]
    pub applicant: Option<String>,
    /// Letter boundaries: `page_breaks`, `single`, `delimiter:<marker>` or `explicit:1-2,3-4`.
    #[arg(long, default_value = "page_breaks")]
    pub boundary: BoundarySpec,
    /// Output corpus directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Keep only sentences whose length lies within the interquartile range.
    #[arg(long)]
    pub iqr: bool,
    /// Also write cleaned, conjoined-word-repaired sentence text here.
    #[arg(long)]
    pub cleaned: Option<PathBuf>,
    /// Applicant-disjoint train,validation,test fractions; writes splits.json.
    #[arg(long, value_delimiter = ',')]
    pub split: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Corpus directory.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Feature vectors output.
    #[arg(long)]
    pub out: PathBuf,
    /// Feature registry; the bundled registry otherwise.
    #[arg(long)]
    pub registry: Option<PathBuf>,
    /// Z-score the vectors and write the fitted statistics here.
    #[arg(long)]
    pub normalize: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WeaklabelArgs {
    /// Corpus directory.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Labeling-function spec (TOML).
    #[arg(long)]
    pub lfs: PathBuf,
    /// Weakly labelled dataset output.
    #[arg(long)]
    pub out: PathBuf,
    /// Coverage report output.
    #[arg(long)]
    pub coverage: PathBuf,
    /// Applicants whose sentences are never labelled, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub exclude: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training records with `text` and `label` fields.
    #[arg(long)]
    pub data: PathBuf,
    /// Model artifact directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = BackendFlag::Lightweight)]
    pub backend: BackendFlag,
    /// Held-out records scored after training and for the learning curve.
    #[arg(long)]
    pub eval: Option<PathBuf>,
    /// Learning-curve table output; needs `--eval`.
    #[arg(long, requires = "eval")]
    pub curve: Option<PathBuf>,
    /// Learning-curve sizes; the profile's sizes otherwise.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Training passes over the data; the profile's value otherwise.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Decision threshold on the positive probability; the profile's value otherwise.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Reference records with `sentence_id` and `label`.
    #[arg(long)]
    pub truth: PathBuf,
    /// Predicted records with `sentence_id` and `label`.
    #[arg(long)]
    pub pred: PathBuf,
    /// Full metrics report output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Corpus directory whose sentences are processed.
    #[arg(long, conflicts_with = "sentences", required_unless_present = "sentences")]
    pub corpus: Option<PathBuf>,
    /// Sentence records, one per line.
    #[arg(long)]
    pub sentences: Option<PathBuf>,
    /// Micro-labels to extract; all three otherwise.
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<MicroLabel>,
    /// Only process sentences the classifier highlights.
    #[arg(long)]
    pub highlighted: bool,
    /// Extraction records output.
    #[arg(long)]
    pub out: PathBuf,
    /// ReAct trace log output.
    #[arg(long)]
    pub traces: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Document holding the applicant's letters.
    #[arg(long)]
    pub input: PathBuf,
    /// Applicant the letters belong to.
    #[arg(long)]
    pub applicant: String,
    /// Letter boundaries: `page_breaks`, `single`, `delimiter:<marker>` or `explicit:1-2,3-4`.
    #[arg(long, default_value = "page_breaks")]
    pub boundary: BoundarySpec,
    /// Report output.
    #[arg(long)]
    pub out: PathBuf,
    /// ReAct trace log output.
    #[arg(long)]
    pub traces: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Listen address.
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Concurrent jobs; the profile's workers otherwise.
    #[arg(long)]
    pub workers: Option<usize>,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    init_logging(cli.global.verbose);
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

impl From<lori_core::pipeline::PipelineError> for CliError {
    fn from(e: lori_core::pipeline::PipelineError) -> Self {
        CliError::runtime(format!("{} stage: {e}", e.stage()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn lists_and_boundaries_parse() {
        let cli = Cli::try_parse_from([
            "lori", "extract", "--sentences", "s", "--out", "o", "--labels", "teamwork,innovation",
        ])
        .unwrap();
        let Command::Extract(a) = cli.command else { panic!() };
        assert_eq!(a.labels, [MicroLabel::Teamwork, MicroLabel::Innovation]);
        let cli =
            Cli::try_parse_from(["lori", "analyze", "--input", "d", "--applicant", "a", "--out", "o", "--boundary", "explicit:1-2,3"])
                .unwrap();
        let Command::Analyze(a) = cli.command else { panic!() };
        assert_eq!(a.boundary, BoundarySpec::Explicit { ranges: vec![(1, 2), (3, 3)] });
    }
}
