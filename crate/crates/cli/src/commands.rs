use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use kalmv::corpus::{load_corpus, load_dataset, QAExample};
use kalmv::eval::{answer_table, evaluate, render_json, verifier_table};
use kalmv::http::{HttpTransport, Limiter};
use kalmv::labeler::{emit_training_records, LabelStats, LabeledVerification};
use kalmv::lm::{HttpLm, LanguageModel, MockLm};
use kalmv::pipeline::{
    read_traces, run_dataset, write_traces, Disposition, Mode, PipelineConfig, PipelineTrace, Resources,
    StrategyRegistry,
};
use kalmv::retrieval::{
    Bm25Index, BundledRetriever, CachedEmbedder, DenseIndex, Embedder, ExclusionSet, HashingEmbedder, HttpEmbedder,
    IndexSnapshot, Retriever, RetrieverKind,
};

use crate::plan::{self, EmbedderChoice, Endpoints, EvalPlan, IndexPlan, LabelPlan, RunPlan};
use crate::settings::Settings;
use crate::{Cli, Command};

pub fn dispatch(cli: &Cli) -> Result<ExitCode> {
    let settings = match &cli.global.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let env = |k: &str| std::env::var(k).ok();
    let g = &cli.global;
    match &cli.command {
        Command::Index(a) => cmd_index(&plan::index_plan(g, a, &settings, &env)?),
        Command::Run(a) => cmd_run(&plan::run_plan(g, a, &settings, &env)?),
        Command::Label(a) => cmd_label(&plan::label_plan(g, a, &settings, &env)?),
        Command::Eval(a) => cmd_eval(&plan::eval_plan(a, &settings)?, false),
        Command::VerifyEval(a) => cmd_eval(&plan::eval_plan(a, &settings)?, true),
    }
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
        }
        _ => Ok(()),
    }
}

fn transport(url: &str, endpoints: &Endpoints, limiter: &Arc<Limiter>) -> HttpTransport {
    HttpTransport::new(url, endpoints.api_key.clone(), endpoints.retry, limiter.clone())
}

fn http_embedder(endpoints: &Endpoints, limiter: &Arc<Limiter>) -> Result<Arc<dyn Embedder>> {
    let url = endpoints
        .embed_url
        .as_deref()
        .ok_or_else(|| anyhow!("dense retrieval needs `endpoints.embed_url` or KALMV_EMBED_URL"))?;
    Ok(Arc::new(CachedEmbedder::new(HttpEmbedder::new(transport(url, endpoints, limiter)))))
}

fn cmd_index(p: &IndexPlan) -> Result<ExitCode> {
    if p.index.exists() && !p.force {
        bail!("{} already exists; pass --force to rebuild it", p.index.display());
    }
    let store = load_corpus(&p.corpus, p.corpus_kind)?;
    let n = store.len();
    let snapshot = match p.kind {
        RetrieverKind::SparseBm25 => IndexSnapshot::sparse(&Bm25Index::build(store, p.bm25)),
        RetrieverKind::DenseCosine => {
            let limiter = Limiter::new(p.parallelism);
            let embedder: Arc<dyn Embedder> = match p.embedder {
                EmbedderChoice::Hashing(dim) => Arc::new(HashingEmbedder::new(dim)),
                EmbedderChoice::Http => http_embedder(&p.endpoints, &limiter)?,
            };
            IndexSnapshot::dense(&DenseIndex::build(store, embedder)?)
        }
    };
    create_parent(&p.index)?;
    snapshot.save(&p.index)?;
    println!("indexed {n} items ({})", p.kind.as_str());
    Ok(ExitCode::SUCCESS)
}

fn load_retriever(
    path: &Path,
    bundle_top_n: usize,
    endpoints: &Endpoints,
    limiter: &Arc<Limiter>,
) -> Result<Box<dyn Retriever>> {
    let snapshot = IndexSnapshot::load(path).with_context(|| format!("loading index {}", path.display()))?;
    let embedder = match (snapshot.kind, snapshot.embedder.as_deref()) {
        (RetrieverKind::SparseBm25, _) => None,
        (RetrieverKind::DenseCosine, Some(name)) if name.starts_with("hashing:") => {
            let dim = name["hashing:".len()..].parse().context("hashing embedder dimension")?;
            Some(Arc::new(HashingEmbedder::new(dim)) as Arc<dyn Embedder>)
        }
        (RetrieverKind::DenseCosine, _) => Some(http_embedder(endpoints, limiter)?),
    };
    let retriever = snapshot.into_retriever(embedder)?;
    Ok(if bundle_top_n > 1 { Box::new(BundledRetriever::new(retriever, bundle_top_n)) } else { retriever })
}

type Lms = (Arc<dyn LanguageModel>, Option<Arc<dyn LanguageModel>>);

fn language_models(mock: Option<&Path>, endpoints: &Endpoints, limiter: &Arc<Limiter>) -> Result<Option<Lms>> {
    if let Some(path) = mock {
        let lm: Arc<dyn LanguageModel> = Arc::new(MockLm::load(path)?);
        return Ok(Some((lm.clone(), Some(lm))));
    }
    let Some(url) = &endpoints.lm_url else {
        return Ok(None);
    };
    let lm: Arc<dyn LanguageModel> = Arc::new(HttpLm::new(transport(url, endpoints, limiter)));
    let verifier = endpoints
        .verifier_url
        .as_ref()
        .map(|v| Arc::new(HttpLm::new(transport(v, endpoints, limiter))) as Arc<dyn LanguageModel>);
    Ok(Some((lm, verifier)))
}

fn summarize(traces: &[PipelineTrace]) -> (usize, usize, usize) {
    let count = |d| traces.iter().filter(|t| t.disposition == d).count();
    (count(Disposition::Answered), count(Disposition::Withheld), count(Disposition::Failed))
}

fn cmd_run(p: &RunPlan) -> Result<ExitCode> {
    let examples = load_dataset(&p.dataset)?;
    let limiter = Limiter::new(p.parallelism);
    let retriever = match (&p.index, p.pipeline.mode.uses_retrieval()) {
        (Some(path), true) => Some(load_retriever(path, p.bundle_top_n, &p.endpoints, &limiter)?),
        _ => None,
    };
    let (lm, verifier) = language_models(p.mock.as_deref(), &p.endpoints, &limiter)?
        .ok_or_else(|| anyhow!("no generation LM: pass --mock or set `endpoints.lm_url` / KALMV_LM_URL"))?;
    let resources = Resources { retriever: retriever.as_deref(), lm: lm.as_ref(), verifier: verifier.as_deref() };
    let traces = run_dataset(&StrategyRegistry::default(), &p.pipeline, resources, &examples, p.seed, p.parallelism)?;
    create_parent(&p.traces)?;
    write_traces(&p.traces, &traces)?;
    let (answered, withheld, failed) = summarize(&traces);
    println!(
        "{} questions ({}, max_rectify_steps {}): {answered} answered, {withheld} withheld, {failed} failed",
        traces.len(),
        p.pipeline.mode,
        p.pipeline.max_rectify_steps
    );
    if !traces.is_empty() && failed == traces.len() {
        bail!("every question failed; see the `error` field of {}", p.traces.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn example_of(t: &PipelineTrace) -> QAExample {
    QAExample::new(t.example_id.clone(), t.question.clone(), t.answers.clone())
}

/// Labels from the first step of each trace: its knowledge and generated answer.
fn label_traces(traces: &[PipelineTrace], p: &LabelPlan) -> Vec<LabeledVerification> {
    let mut out = Vec::new();
    for t in traces {
        let Some(step) = t.steps.first() else {
            log::warn!("{}: trace has no steps, not labeled", t.example_id);
            continue;
        };
        let knowledge = step.knowledge_text.as_deref().unwrap_or("");
        out.push(LabeledVerification::new(&example_of(t), knowledge, Some(&step.generated_answer), p.rule));
    }
    out
}

fn label_live(p: &LabelPlan) -> Result<Vec<LabeledVerification>> {
    let dataset = p.dataset.as_ref().expect("plan checked dataset");
    let index = p.index.as_ref().expect("plan checked index");
    let examples = load_dataset(dataset)?;
    let limiter = Limiter::new(p.parallelism);
    let retriever = load_retriever(index, p.bundle_top_n, &p.endpoints, &limiter)?;
    match language_models(p.mock.as_deref(), &p.endpoints, &limiter)? {
        Some((lm, _)) => {
            let mut config = PipelineConfig::default().with_mode(Mode::KnowledgeAugmented).with_max_rectify_steps(0);
            config.first_generation.max_new_tokens = p.max_new_tokens;
            let resources = Resources { retriever: Some(retriever.as_ref()), lm: lm.as_ref(), verifier: None };
            let traces =
                run_dataset(&StrategyRegistry::default(), &config, resources, &examples, p.seed, p.parallelism)?;
            Ok(label_traces(&traces, p))
        }
        None => {
            log::warn!("no generation LM configured; labeling gold answers");
            examples
                .iter()
                .map(|ex| {
                    let hit = retriever.retrieve_next(&ex.question, &ExclusionSet::new())?;
                    let knowledge = hit.as_ref().map_or("", |h| h.item.text.as_str());
                    Ok(LabeledVerification::new(ex, knowledge, None, p.rule))
                })
                .collect()
        }
    }
}

pub fn stats_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".stats.json");
    PathBuf::from(name)
}

fn cmd_label(p: &LabelPlan) -> Result<ExitCode> {
    let labeled = match &p.traces {
        Some(path) => label_traces(&read_traces(path)?, p),
        None => label_live(p)?,
    };
    let mut stats = LabelStats::new(p.rule);
    let mut lines = String::new();
    for l in &labeled {
        stats.record(&p.split, l);
        for r in emit_training_records(l)? {
            lines.push_str(&serde_json::to_string(&r)?);
            lines.push('\n');
        }
    }
    create_parent(&p.output)?;
    fs::write(&p.output, lines).with_context(|| format!("writing {}", p.output.display()))?;
    let sidecar = stats_path(&p.output);
    fs::write(&sidecar, serde_json::to_string_pretty(&stats)? + "\n")
        .with_context(|| format!("writing {}", sidecar.display()))?;
    let counts = stats.splits.get(&p.split).cloned().unwrap_or_default();
    println!(
        "labeled {} examples ({} records): A {}, B {}, C {}",
        labeled.len(),
        labeled.len() * kalmv::verifier::TEMPLATE_IDS.len(),
        counts.a,
        counts.b,
        counts.c
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(p: &EvalPlan, verifier: bool) -> Result<ExitCode> {
    let mut traces = Vec::new();
    for path in &p.traces {
        traces.extend(read_traces(path)?);
    }
    let report = evaluate(&traces, p.rule);
    if let Some(path) = &p.report {
        create_parent(path)?;
        fs::write(path, render_json(&report)).with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{}", if verifier { verifier_table(&report) } else { answer_table(&report) });
    Ok(ExitCode::SUCCESS)
}
