//! Turns flags, environment and config file into fully resolved command plans.
//! Nothing here touches the filesystem or network.

use std::path::PathBuf;
use std::time::Duration;

use anyhow::{anyhow, Context, Result};
use kalmv::corpus::CorpusKind;
use kalmv::http::RetryPolicy;
use kalmv::labeler::LabelRule;
use kalmv::lm::GenerationParams;
use kalmv::pipeline::{Mode, PipelineConfig};
use kalmv::retrieval::{Bm25Params, RetrieverKind};

use crate::settings::Settings;
use crate::{EvalArgs, GlobalArgs, IndexArgs, LabelArgs, RunArgs};

pub const DEFAULT_API_KEY_ENV: &str = "KALMV_API_KEY";

/// Source of environment variables; tests substitute a fixed map.
pub type Env<'a> = &'a dyn Fn(&str) -> Option<String>;

fn pick<T>(flag: Option<T>, config: Option<T>) -> Option<T> {
    flag.or(config)
}

fn require<T>(value: Option<T>, key: &str, flag: &str) -> Result<T> {
    value.ok_or_else(|| anyhow!("missing `{key}` (set it in the config file or pass {flag})"))
}

fn parse_opt<T: std::str::FromStr<Err = String>>(s: Option<String>) -> Result<Option<T>> {
    s.map(|v| v.parse::<T>().map_err(|e| anyhow!(e))).transpose()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Endpoints {
    pub lm_url: Option<String>,
    pub verifier_url: Option<String>,
    pub embed_url: Option<String>,
    pub api_key: Option<String>,
    pub retry: RetryPolicy,
}

fn endpoints(s: &Settings, env: Env<'_>, lm: bool, verifier: bool) -> Result<Endpoints> {
    let url = |key: &'static str, var: &str| -> Result<Option<String>> {
        let configured = s.string(key)?;
        Ok(env(var).filter(|v| !v.is_empty()).or(configured))
    };
    let lm_url = if lm { url("endpoints.lm_url", "KALMV_LM_URL")? } else { None };
    let verifier_url = if verifier { url("endpoints.verifier_url", "KALMV_VERIFIER_URL")? } else { None };
    let embed_url = url("endpoints.embed_url", "KALMV_EMBED_URL")?;
    Ok(Endpoints { lm_url, verifier_url, embed_url, api_key: api_key(s, env)?, retry: retry(s)? })
}

fn api_key(s: &Settings, env: Env<'_>) -> Result<Option<String>> {
    let var = s.string("endpoints.api_key_env")?.unwrap_or_else(|| DEFAULT_API_KEY_ENV.to_owned());
    Ok(env(&var).filter(|v| !v.is_empty()))
}

fn retry(s: &Settings) -> Result<RetryPolicy> {
    let mut policy = RetryPolicy::default();
    if let Some(r) = s.integer("endpoints.retries")? {
        policy.retries = u32::try_from(r).context("endpoints.retries")?;
    }
    if let Some(t) = s.integer("endpoints.timeout_secs")? {
        policy.timeout = Duration::from_secs(t);
    }
    Ok(policy)
}

fn parallelism(g: &GlobalArgs, s: &Settings) -> Result<usize> {
    let n = pick(g.parallelism, s.integer("parallelism")?.map(|n| n as usize)).unwrap_or(4);
    anyhow::ensure!(n >= 1, "parallelism must be at least 1");
    Ok(n)
}

fn seed(g: &GlobalArgs, s: &Settings) -> Result<u64> {
    Ok(pick(g.seed, s.integer("seed")?).unwrap_or(0))
}

fn bundle_top_n(s: &Settings) -> Result<usize> {
    Ok(s.integer("retrieval.bundle_top_n")?.map_or(1, |n| n as usize).max(1))
}

fn max_new_tokens(s: &Settings) -> Result<u32> {
    let n = s.integer("pipeline.max_new_tokens")?;
    Ok(n.map_or(GenerationParams::greedy().max_new_tokens, |n| n as u32))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EmbedderChoice {
    Http,
    Hashing(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexPlan {
    pub corpus: PathBuf,
    pub corpus_kind: CorpusKind,
    pub index: PathBuf,
    pub kind: RetrieverKind,
    pub bm25: Bm25Params,
    pub embedder: EmbedderChoice,
    pub endpoints: Endpoints,
    pub parallelism: usize,
    pub force: bool,
}

pub fn index_plan(g: &GlobalArgs, a: &IndexArgs, s: &Settings, env: Env<'_>) -> Result<IndexPlan> {
    let parallelism = parallelism(g, s)?;
    let corpus = require(pick(a.corpus.clone(), s.path("paths.corpus")?), "paths.corpus", "--corpus")?;
    let corpus_kind =
        parse_opt::<CorpusKind>(pick(a.corpus_kind.clone(), s.string("paths.corpus_kind")?))?.unwrap_or(CorpusKind::Passages);
    let index = require(pick(a.index.clone(), s.path("paths.index")?), "paths.index", "--index")?;
    let endpoints = endpoints(s, env, false, false)?;
    let kind = parse_opt::<RetrieverKind>(pick(a.retriever.clone(), s.string("retrieval.kind")?))?
        .unwrap_or(RetrieverKind::SparseBm25);
    let defaults = Bm25Params::default();
    let bm25 = Bm25Params {
        k1: s.float("retrieval.k1")?.unwrap_or(defaults.k1),
        b: s.float("retrieval.b")?.unwrap_or(defaults.b),
    };
    let dim = s.integer("retrieval.hashing_dim")?.map_or(256, |d| d as usize);
    let embedder = match s.string("retrieval.embedder")?.as_deref() {
        None | Some("http") => EmbedderChoice::Http,
        Some("hashing") => EmbedderChoice::Hashing(dim),
        Some(other) => return Err(anyhow!("unknown retrieval.embedder `{other}` (expected http or hashing)")),
    };
    Ok(IndexPlan { corpus, corpus_kind, index, kind, bm25, embedder, endpoints, parallelism, force: a.force })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub dataset: PathBuf,
    /// Absent only for modes that never retrieve.
    pub index: Option<PathBuf>,
    pub traces: PathBuf,
    pub pipeline: PipelineConfig,
    pub bundle_top_n: usize,
    pub endpoints: Endpoints,
    pub mock: Option<PathBuf>,
    pub seed: u64,
    pub parallelism: usize,
}

fn pipeline_config(a: &RunArgs, s: &Settings) -> Result<PipelineConfig> {
    let mut c = PipelineConfig::default();
    if let Some(m) = parse_opt::<Mode>(pick(a.mode.clone(), s.string("pipeline.mode")?))? {
        c.mode = m;
    }
    if let Some(n) = pick(a.max_rectify_steps.map(u64::from), s.integer("pipeline.max_rectify_steps")?) {
        c.max_rectify_steps = u32::try_from(n).context("pipeline.max_rectify_steps")?;
    }
    if let Some(v) = s.float("pipeline.confidence_threshold")? {
        c.confidence_threshold = v;
    }
    if let Some(v) = s.float("pipeline.kf1_threshold")? {
        c.kf1_threshold = v;
    }
    if let Some(ids) = s.integer_list("pipeline.template_ids")? {
        c.template_ids = ids.into_iter().map(|i| u8::try_from(i).unwrap_or(u8::MAX)).collect();
    }
    let tokens = max_new_tokens(s)?;
    c.first_generation.max_new_tokens = tokens;
    c.resample_generation.max_new_tokens = tokens;
    if let Some(k) = s.integer("pipeline.top_k")? {
        c.resample_generation.top_k = u32::try_from(k).context("pipeline.top_k")?;
    }
    if let Some(t) = s.float("pipeline.temperature")? {
        c.resample_generation.temperature = t;
    }
    if let Some(b) = s.boolean("pipeline.record_timing")? {
        c.record_timing = b;
    }
    c.validate().map_err(|e| anyhow!("invalid pipeline config: {e}"))?;
    Ok(c)
}

pub fn run_plan(g: &GlobalArgs, a: &RunArgs, s: &Settings, env: Env<'_>) -> Result<RunPlan> {
    let seed = seed(g, s)?;
    let parallelism = parallelism(g, s)?;
    let dataset = require(pick(a.dataset.clone(), s.path("paths.dataset")?), "paths.dataset", "--dataset")?;
    let index = pick(a.index.clone(), s.path("paths.index")?);
    let traces = require(pick(a.traces.clone(), s.path("paths.traces")?), "paths.traces", "--traces")?;
    let endpoints = endpoints(s, env, true, true)?;
    let bundle_top_n = bundle_top_n(s)?;
    let pipeline = pipeline_config(a, s)?;
    if pipeline.mode.uses_retrieval() && index.is_none() {
        return Err(anyhow!("mode {} needs `paths.index` (or --index)", pipeline.mode));
    }
    Ok(RunPlan { dataset, index, traces, pipeline, bundle_top_n, endpoints, mock: g.mock.clone(), seed, parallelism })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelPlan {
    pub dataset: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub traces: Option<PathBuf>,
    pub output: PathBuf,
    pub rule: LabelRule,
    pub split: String,
    pub bundle_top_n: usize,
    pub max_new_tokens: u32,
    pub endpoints: Endpoints,
    pub mock: Option<PathBuf>,
    pub seed: u64,
    pub parallelism: usize,
}

pub fn label_plan(g: &GlobalArgs, a: &LabelArgs, s: &Settings, env: Env<'_>) -> Result<LabelPlan> {
    let seed = seed(g, s)?;
    let parallelism = parallelism(g, s)?;
    let dataset = pick(a.dataset.clone(), s.path("paths.dataset")?);
    let index = pick(a.index.clone(), s.path("paths.index")?);
    let traces = pick(a.traces.clone(), s.path("paths.traces")?);
    let output = require(pick(a.output.clone(), s.path("paths.labels")?), "paths.labels", "--output")?;
    let endpoints = endpoints(s, env, true, false)?;
    let bundle_top_n = bundle_top_n(s)?;
    let max_new_tokens = max_new_tokens(s)?;
    let rule = parse_opt::<LabelRule>(pick(a.label_rule.clone(), s.string("labeler.rule")?))?.unwrap_or_default();
    let split = pick(a.split.clone(), s.string("labeler.split")?).unwrap_or_else(|| "train".to_owned());
    // explicit trace flag wins over a dataset from the config and vice versa
    let (dataset, traces) = match (a.traces.is_some(), a.dataset.is_some()) {
        (true, false) => (None, traces),
        (false, true) => (dataset, None),
        _ => (dataset, traces),
    };
    if traces.is_none() {
        let _ = require(dataset.as_ref(), "paths.dataset", "--dataset or --traces")?;
        let _ = require(index.as_ref(), "paths.index", "--index")?;
    }
    Ok(LabelPlan {
        dataset,
        index,
        traces,
        output,
        rule,
        split,
        bundle_top_n,
        max_new_tokens,
        endpoints,
        mock: g.mock.clone(),
        seed,
        parallelism,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalPlan {
    pub traces: Vec<PathBuf>,
    pub report: Option<PathBuf>,
    pub rule: LabelRule,
}

pub fn eval_plan(a: &EvalArgs, s: &Settings) -> Result<EvalPlan> {
    let configured = s.path("paths.traces")?;
    let traces = if a.traces.is_empty() { configured.into_iter().collect() } else { a.traces.clone() };
    anyhow::ensure!(!traces.is_empty(), "missing `paths.traces` (set it in the config file or pass --traces)");
    let report = pick(a.report.clone(), s.path("paths.report")?);
    let rule = parse_opt::<LabelRule>(pick(a.label_rule.clone(), s.string("labeler.rule")?))?.unwrap_or_default();
    Ok(EvalPlan { traces, report, rule })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use clap::CommandFactory;

    use super::*;
    use crate::settings::KNOWN_KEYS;
    use crate::Cli;

    fn full_config() -> Settings {
        Settings::parse(
            r#"
seed = 1
parallelism = 2
[paths]
corpus = "c.jsonl"
corpus_kind = "passages"
dataset = "d.jsonl"
index = "i.json"
traces = "t.jsonl"
report = "r.json"
labels = "l.jsonl"
[endpoints]
lm_url = "http://lm"
verifier_url = "http://verifier"
embed_url = "http://embed"
api_key_env = "MY_KEY"
retries = 1
timeout_secs = 5
[retrieval]
kind = "sparse_bm25"
k1 = 1.5
b = 0.5
embedder = "hashing"
hashing_dim = 64
bundle_top_n = 2
[pipeline]
mode = "kalmv"
max_rectify_steps = 3
confidence_threshold = 0.4
kf1_threshold = 0.3
template_ids = [1, 2]
max_new_tokens = 16
top_k = 10
temperature = 0.5
record_timing = false
[labeler]
rule = "token_overlap"
split = "dev"
"#,
        )
        .unwrap()
    }

    fn no_env(_: &str) -> Option<String> {
        None
    }

    fn help_keys(sub: &str) -> BTreeSet<String> {
        let mut cmd = Cli::command();
        let help = cmd.find_subcommand_mut(sub).unwrap().render_long_help().to_string();
        let section = help.split("Config keys read:").nth(1).expect("help lists config keys");
        section.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_owned).collect()
    }

    fn reads(s: &Settings) -> BTreeSet<String> {
        s.reads().into_iter().map(str::to_owned).collect()
    }

    #[test]
    fn help_lists_exactly_the_keys_each_command_reads() {
        let g = GlobalArgs::default();
        let s = full_config();
        index_plan(&g, &IndexArgs::default(), &s, &no_env).unwrap();
        assert_eq!(reads(&s), help_keys("index"));

        let s = full_config();
        run_plan(&g, &RunArgs::default(), &s, &no_env).unwrap();
        assert_eq!(reads(&s), help_keys("run"));

        let s = full_config();
        label_plan(&g, &LabelArgs::default(), &s, &no_env).unwrap();
        assert_eq!(reads(&s), help_keys("label"));

        for sub in ["eval", "verify-eval"] {
            let s = full_config();
            eval_plan(&EvalArgs::default(), &s).unwrap();
            assert_eq!(reads(&s), help_keys(sub));
        }
    }

    #[test]
    fn every_known_key_is_read_by_some_command() {
        let mut all = BTreeSet::new();
        for sub in ["index", "run", "label", "eval"] {
            all.extend(help_keys(sub));
        }
        let known: BTreeSet<String> = KNOWN_KEYS.iter().map(|k| k.to_string()).collect();
        assert_eq!(all, known);
    }

    #[test]
    fn config_values_reach_the_plan() {
        let env = |k: &str| (k == "MY_KEY").then(|| "secret".to_owned());
        let p = run_plan(&GlobalArgs::default(), &RunArgs::default(), &full_config(), &env).unwrap();
        assert_eq!(p.seed, 1);
        assert_eq!(p.pipeline.max_rectify_steps, 3);
        assert_eq!(p.pipeline.template_ids, [1, 2]);
        assert_eq!(p.pipeline.resample_generation.top_k, 10);
        assert_eq!(p.pipeline.first_generation.max_new_tokens, 16);
        assert_eq!(p.bundle_top_n, 2);
        assert_eq!(p.endpoints.api_key.as_deref(), Some("secret"));
        assert_eq!(p.endpoints.retry.retries, 1);
    }

    #[test]
    fn flags_and_environment_override_the_file() {
        let g = GlobalArgs { seed: Some(9), parallelism: Some(3), ..Default::default() };
        let a = RunArgs { mode: Some("naive".into()), max_rectify_steps: Some(0), ..Default::default() };
        let env = |k: &str| (k == "KALMV_LM_URL").then(|| "http://override".to_owned());
        let p = run_plan(&g, &a, &full_config(), &env).unwrap();
        assert_eq!((p.seed, p.parallelism), (9, 3));
        assert_eq!(p.pipeline.mode, Mode::Naive);
        assert_eq!(p.pipeline.max_rectify_steps, 0);
        assert_eq!(p.endpoints.lm_url.as_deref(), Some("http://override"));
        assert_eq!(p.endpoints.verifier_url.as_deref(), Some("http://verifier"));
    }

    #[test]
    fn missing_required_paths_are_named() {
        let s = Settings::default();
        let err = run_plan(&GlobalArgs::default(), &RunArgs::default(), &s, &no_env).unwrap_err();
        assert!(err.to_string().contains("paths.dataset"));
        let a = RunArgs { dataset: Some("d".into()), traces: Some("t".into()), ..Default::default() };
        let err = run_plan(&GlobalArgs::default(), &a, &s, &no_env).unwrap_err();
        assert!(err.to_string().contains("paths.index"));
        let a = RunArgs { mode: Some("naive".into()), ..a };
        assert!(run_plan(&GlobalArgs::default(), &a, &s, &no_env).is_ok());
    }
}
