//! `kalmv`: build indexes, run the answering pipeline, emit verifier training
//! data and evaluate trace files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod plan;
mod settings;

const INDEX_KEYS: &str = "Config keys read:
  parallelism
  paths.corpus
  paths.corpus_kind
  paths.index
  endpoints.embed_url
  endpoints.api_key_env
  endpoints.retries
  endpoints.timeout_secs
  retrieval.kind
  retrieval.k1
  retrieval.b
  retrieval.embedder
  retrieval.hashing_dim";

const RUN_KEYS: &str = "Config keys read:
  seed
  parallelism
  paths.dataset
  paths.index
  paths.traces
  endpoints.lm_url
  endpoints.verifier_url
  endpoints.embed_url
  endpoints.api_key_env
  endpoints.retries
  endpoints.timeout_secs
  retrieval.bundle_top_n
  pipeline.mode
  pipeline.max_rectify_steps
  pipeline.confidence_threshold
  pipeline.kf1_threshold
  pipeline.template_ids
  pipeline.max_new_tokens
  pipeline.top_k
  pipeline.temperature
  pipeline.record_timing";

const LABEL_KEYS: &str = "Config keys read:
  seed
  parallelism
  paths.dataset
  paths.index
  paths.traces
  paths.labels
  endpoints.lm_url
  endpoints.embed_url
  endpoints.api_key_env
  endpoints.retries
  endpoints.timeout_secs
  retrieval.bundle_top_n
  pipeline.max_new_tokens
  labeler.rule
  labeler.split";

const EVAL_KEYS: &str = "Config keys read:
  paths.traces
  paths.report
  labeler.rule";

#[derive(Debug, Parser)]
#[command(name = "kalmv", version, about = "Verify-and-rectify question answering over retrieved knowledge")]
#[command(after_help = "Endpoint URLs can also come from KALMV_LM_URL, KALMV_VERIFIER_URL and KALMV_EMBED_URL, \
which take precedence over the config file. The API key is read from the variable named by \
endpoints.api_key_env (default KALMV_API_KEY).")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed for per-question seeds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Serve both LMs from a JSON-lines mock fixture instead of HTTP endpoints.
    #[arg(long, global = true, value_name = "FIXTURE")]
    pub mock: Option<PathBuf>,
    /// Questions in flight and concurrent endpoint requests.
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a retrieval index snapshot from a corpus.
    #[command(after_help = INDEX_KEYS)]
    Index(IndexArgs),
    /// Answer every dataset question and write one trace per question.
    #[command(after_help = RUN_KEYS)]
    Run(RunArgs),
    /// Auto-label examples and write verifier training records.
    #[command(after_help = LABEL_KEYS)]
    Label(LabelArgs),
    /// Answer quality (F1, EM, accuracy) from trace files.
    #[command(after_help = EVAL_KEYS)]
    Eval(EvalArgs),
    /// Verifier quality and the step-budget sweep from trace files.
    #[command(name = "verify-eval", after_help = EVAL_KEYS)]
    VerifyEval(EvalArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// passages or triples.
    #[arg(long)]
    pub corpus_kind: Option<String>,
    /// Snapshot output path.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// sparse_bm25 or dense_cosine.
    #[arg(long)]
    pub retriever: Option<String>,
    /// Overwrite an existing snapshot.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Trace output path.
    #[arg(long)]
    pub traces: Option<PathBuf>,
    /// naive, knowledge_augmented, adaptive_confidence, augmenter_kf1, augmenter_confidence or kalmv.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub max_rectify_steps: Option<u32>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct LabelArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Label from the first step of these traces instead of generating.
    #[arg(long)]
    pub traces: Option<PathBuf>,
    /// Training JSON-lines output; statistics go to `<output>.stats.json`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// accuracy or token_overlap.
    #[arg(long)]
    pub label_rule: Option<String>,
    /// Split name recorded in the statistics.
    #[arg(long)]
    pub split: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvalArgs {
    /// Trace files; may be repeated.
    #[arg(long)]
    pub traces: Vec<PathBuf>,
    /// JSON report output path.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// accuracy or token_overlap.
    #[arg(long)]
    pub label_rule: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
