//! The `ewra` command line.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ewra_core::curate::{curate, Gazetteer, Sentence};
use ewra_core::curriculum::{build_regime, emit_plan, split, Hyperparameters, RegimeKind};
use ewra_core::event::{Event, EventRegistry};
use ewra_core::ingest::{Article, KeywordBank};
use ewra_core::jsonl::{read_jsonl, write_jsonl};
use ewra_core::metrics::{evaluate, DegeneratePolicy, EvaluateOptions, GoldRecord, PredictionRecord};
use ewra_core::prompt::PromptVariant;
use ewra_core::sample::AlignmentSample;
use ewra_core::{TaskKind, Taxonomy};
use serde_json::json;

use crate::config::{Config, ENV_LLM_ENDPOINT};
use crate::embed::EmbeddingClient;
use crate::fetch::{ingest_event, IngestOptions};
use crate::generate::{generate, GenerateOptions};
use crate::http::build_client;
use crate::llm::{ChatClient, ChatConfig, RetryPolicy};
use crate::report;
use crate::summary::{relative, StageKind, StageSummary};

#[derive(Debug, Parser)]
#[command(name = "ewra", version, about = "Extreme-weather news alignment pipeline")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "EWRA_CONFIG")]
    pub config: Option<PathBuf>,
    /// Overrides the split seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Log filter for the JSON logs on stderr (e.g. `info`, `debug`).
    #[arg(long, global = true, default_value = "info")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fetch news feeds and articles for events.
    Ingest(IngestArgs),
    /// Segment articles into sentences and keep located ones.
    Curate(CurateArgs),
    /// Generate alignment samples through a chat-completions endpoint.
    GenAlign(GenAlignArgs),
    /// Split samples and write training regimes with their plan files.
    BuildCurriculum(BuildCurriculumArgs),
    /// Score predictions against a gold set.
    Evaluate(EvaluateArgs),
    /// Consolidate stage summaries into one report.
    Report(ReportArgs),
}

fn task_parser() -> impl TypedValueParser<Value = TaskKind> {
    PossibleValuesParser::new(["vie", "topic", "emotion"]).map(|s| s.parse::<TaskKind>().expect("listed value"))
}

fn variant_parser() -> impl TypedValueParser<Value = PromptVariant> {
    PossibleValuesParser::new(["explicit", "implicit"]).map(|s| s.parse::<PromptVariant>().expect("listed value"))
}

fn regime_parser() -> impl TypedValueParser<Value = RegimeKind> {
    PossibleValuesParser::new(RegimeKind::ALL.map(|r| r.as_str())).map(|s| s.parse::<RegimeKind>().expect("listed value"))
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Event id (repeatable).
    #[arg(long, required_unless_present = "all", conflicts_with = "all")]
    pub event: Vec<String>,
    /// Every event in the registry.
    #[arg(long)]
    pub all: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CurateArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Directory of per-event article files [default: <out>/articles].
    #[arg(long)]
    pub articles: Option<PathBuf>,
    /// Only these events [default: every file in the articles directory].
    #[arg(long)]
    pub event: Vec<String>,
    /// Gazetteer TSV [default: paths.gazetteer from the config].
    #[arg(long)]
    pub gazetteer: Option<PathBuf>,
    /// Drop articles without a publication date.
    #[arg(long)]
    pub drop_undated: bool,
}

#[derive(Debug, Args)]
pub struct GenAlignArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Sentences file or directory [default: <out>/sentences].
    #[arg(long)]
    pub sentences: Option<PathBuf>,
    /// Tasks [default: all].
    #[arg(long, value_delimiter = ',', value_parser = task_parser())]
    pub task: Vec<TaskKind>,
    /// Prompt variants [default: both].
    #[arg(long, value_delimiter = ',', value_parser = variant_parser())]
    pub variant: Vec<PromptVariant>,
    /// Use only the first N sentences.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BuildCurriculumArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Alignment file or directory [default: <out>/alignment].
    #[arg(long)]
    pub alignment: Option<PathBuf>,
    #[arg(long, required = true, value_delimiter = ',', value_parser = regime_parser())]
    pub regime: Vec<RegimeKind>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// Only this task [default: every task in the gold file].
    #[arg(long, value_parser = task_parser())]
    pub task: Option<TaskKind>,
    /// Leave zero-variance rankings out of the correlation mean.
    #[arg(long)]
    pub exclude_degenerate: bool,
    /// Skip the embedding similarity even when an endpoint is configured.
    #[arg(long)]
    pub no_similarity: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Html,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory holding `summaries/`.
    #[arg(long = "in")]
    pub run_dir: PathBuf,
    #[arg(long, value_enum, default_value = "html")]
    pub format: ReportFormat,
    /// Output file, or `-` for stdout [default: <in>/report.<format>].
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Report even when some stages have no summary.
    #[arg(long)]
    pub allow_partial: bool,
}

/// Failure with its exit code: usage/config errors exit 2, the rest 1.
#[derive(Debug)]
pub enum CliError {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(e) | CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

fn usage(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Usage(e.into())
}

type CliResult<T = ()> = Result<T, CliError>;

pub fn init_logging(level: &str) {
    let filter = tracing_subscriber::EnvFilter::try_new(level).unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt().json().with_writer(std::io::stderr).with_env_filter(filter).try_init();
}

/// Parses arguments, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    init_logging(&cli.log_level);
    let rt = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: starting runtime: {e}");
            return ExitCode::from(1);
        }
    };
    match rt.block_on(run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            tracing::error!(error = %e, "command failed");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

struct Env {
    cfg: Config,
    registry: EventRegistry,
    taxonomy: Taxonomy,
}

fn load_env(cli: &Cli) -> CliResult<Env> {
    let mut cfg = Config::load(cli.config.as_deref()).map_err(usage)?;
    if let Some(seed) = cli.seed {
        cfg.split.seed = seed;
    }
    let registry = match &cfg.paths.events {
        Some(p) => EventRegistry::load(p).map_err(usage)?,
        None => EventRegistry::builtin(),
    };
    let taxonomy = match &cfg.paths.taxonomy {
        Some(p) => Taxonomy::load(p).map_err(usage)?,
        None => Taxonomy::default(),
    };
    Ok(Env { cfg, registry, taxonomy })
}

pub async fn run(cli: Cli) -> CliResult {
    let env = load_env(&cli)?;
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(&env, a).await,
        Command::Curate(a) => cmd_curate(&env, a),
        Command::GenAlign(a) => cmd_gen_align(&env, a).await,
        Command::BuildCurriculum(a) => cmd_build_curriculum(&env, a),
        Command::Evaluate(a) => cmd_evaluate(&env, a).await,
        Command::Report(a) => cmd_report(a),
    }
}

fn lookup_events<'a>(registry: &'a EventRegistry, ids: &[String]) -> CliResult<Vec<&'a Event>> {
    ids.iter()
        .map(|id| {
            registry.get(id).ok_or_else(|| {
                usage(anyhow!("unknown event id `{id}`; known ids: {}", registry.ids().join(", ")))
            })
        })
        .collect()
}

fn write_summary(out: &Path, s: &StageSummary) -> CliResult {
    s.write(out).with_context(|| format!("writing summary under {}", out.display()))?;
    Ok(())
}

/// `*.jsonl` files of a directory in name order, or the path itself.
fn jsonl_inputs(path: &Path) -> CliResult<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    if !path.is_dir() {
        return Err(usage(anyhow!("{} does not exist", path.display())));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .with_context(|| format!("listing {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

fn http_client(cfg: &Config, timeout: Duration) -> CliResult<reqwest::Client> {
    build_client(cfg.http_proxy.as_deref(), timeout, &cfg.ingest.user_agent).map_err(usage)
}

async fn cmd_ingest(env: &Env, a: &IngestArgs) -> CliResult {
    let events: Vec<&Event> = if a.all { env.registry.events.iter().collect() } else { lookup_events(&env.registry, &a.event)? };
    let bank = match &env.cfg.paths.keywords {
        Some(p) => KeywordBank::load(p).map_err(usage)?,
        None => KeywordBank::default(),
    };
    let ic = &env.cfg.ingest;
    let client = http_client(&env.cfg, Duration::from_secs(ic.timeout_secs))?;
    let opts = IngestOptions {
        feed_base: ic.feed_base.clone(),
        locale: ic.locale.clone(),
        window_days: ic.window_days,
        workers: ic.workers,
        politeness: Duration::from_millis(ic.politeness_ms),
        ..Default::default()
    };
    let mut failed = 0;
    for event in &events {
        let outcome = ingest_event(&client, event, &bank, &opts).await.map_err(|e| anyhow!("{}: {e}", event.id))?;
        let path = a.out.join("articles").join(format!("{}.jsonl", event.id));
        write_jsonl(&path, &outcome.articles).map_err(anyhow::Error::from)?;
        if outcome.total_failure() {
            failed += 1;
        }
        tracing::info!(event = %event.id, stats = ?outcome.stats, "ingested");
        println!("{}: {} articles -> {}", event.id, outcome.articles.len(), path.display());
        write_summary(
            &a.out,
            &StageSummary {
                stage: StageKind::Ingest,
                key: event.id.clone(),
                outputs: vec![relative(&a.out, &path)],
                details: serde_json::to_value(&outcome.stats).expect("stats serialize"),
                aborted: outcome.total_failure().then(|| format!("all {} feeds failed", outcome.stats.queries)),
            },
        )?;
    }
    if failed > 0 && failed == events.len() {
        return Err(CliError::Runtime(anyhow!("every feed request failed")));
    }
    Ok(())
}

fn cmd_curate(env: &Env, a: &CurateArgs) -> CliResult {
    let gpath = a
        .gazetteer
        .clone()
        .or_else(|| env.cfg.paths.gazetteer.clone())
        .ok_or_else(|| usage(anyhow!("no gazetteer; pass --gazetteer or set paths.gazetteer")))?;
    let gazetteer = Gazetteer::load(&gpath).map_err(usage)?;
    let dir = a.articles.clone().unwrap_or_else(|| a.out.join("articles"));
    let files: Vec<(String, PathBuf)> = if a.event.is_empty() {
        jsonl_inputs(&dir)?
            .into_iter()
            .map(|p| (p.file_stem().unwrap_or_default().to_string_lossy().into_owned(), p))
            .collect()
    } else {
        a.event.iter().map(|id| (id.clone(), dir.join(format!("{id}.jsonl")))).collect()
    };
    if files.is_empty() {
        return Err(usage(anyhow!("no article files in {}", dir.display())));
    }
    for (id, path) in files {
        let event = *lookup_events(&env.registry, std::slice::from_ref(&id))?.first().expect("one event");
        let mut articles: Vec<Article> = read_jsonl(&path).map_err(anyhow::Error::from)?;
        let before = articles.len();
        if a.drop_undated {
            articles.retain(|x| x.published.is_some());
        }
        let (sentences, rep) = curate(&articles, &gazetteer, event);
        let out_path = a.out.join("sentences").join(format!("{id}.jsonl"));
        write_jsonl(&out_path, &sentences).map_err(anyhow::Error::from)?;
        println!("{id}: {} of {} sentences kept -> {}", rep.kept, rep.sentences_segmented, out_path.display());
        let mut details = serde_json::to_value(&rep).expect("report serializes");
        details["dropped_undated"] = json!(before - articles.len());
        write_summary(
            &a.out,
            &StageSummary {
                stage: StageKind::Curate,
                key: id.clone(),
                outputs: vec![relative(&a.out, &out_path)],
                details,
                aborted: None,
            },
        )?;
    }
    Ok(())
}

pub fn chat_config(cfg: &Config) -> CliResult<ChatConfig> {
    let endpoint = cfg
        .llm
        .endpoint
        .clone()
        .ok_or_else(|| usage(anyhow!("no LLM endpoint; set llm.endpoint or {ENV_LLM_ENDPOINT}")))?;
    Ok(ChatConfig {
        endpoint,
        api_key: cfg.llm.api_key.clone(),
        model: cfg.llm.model.clone(),
        system_prompt: cfg.llm.system_prompt.clone(),
        temperature: cfg.llm.temperature,
        max_tokens: cfg.llm.max_tokens,
        timeout: cfg.llm_timeout(),
        retry: RetryPolicy {
            max_attempts: cfg.llm.max_retries,
            base: Duration::from_millis(cfg.llm.backoff_base_ms),
            ..Default::default()
        },
        requests_per_second: cfg.llm.requests_per_second,
    })
}

async fn cmd_gen_align(env: &Env, a: &GenAlignArgs) -> CliResult {
    let chat = chat_config(&env.cfg)?;
    let src = a.sentences.clone().unwrap_or_else(|| a.out.join("sentences"));
    let mut sentences: Vec<Sentence> = Vec::new();
    for p in jsonl_inputs(&src)? {
        sentences.extend(read_jsonl::<Sentence>(&p).map_err(anyhow::Error::from)?);
    }
    if let Some(n) = a.limit {
        sentences.truncate(n);
    }
    let tasks = if a.task.is_empty() { TaskKind::ALL.to_vec() } else { a.task.clone() };
    let variants =
        if a.variant.is_empty() { vec![PromptVariant::Explicit, PromptVariant::Implicit] } else { a.variant.clone() };

    let client = ChatClient::new(http_client(&env.cfg, chat.timeout)?, chat);
    let cancel = Arc::new(AtomicBool::new(false));
    {
        let cancel = cancel.clone();
        tokio::spawn(async move {
            if tokio::signal::ctrl_c().await.is_ok() {
                tracing::warn!("interrupt received; finishing in-flight requests");
                cancel.store(true, Ordering::SeqCst);
            }
        });
    }
    let opts = GenerateOptions { in_flight: env.cfg.llm.in_flight, max_attempts: env.cfg.llm.max_retries, cancel };

    for task in tasks {
        for &variant in &variants {
            let key = format!("{task}-{variant}");
            let outcome = generate(&client, &sentences, task, variant, &env.taxonomy, &opts).await;
            let samples_path = a.out.join("alignment").join(format!("{key}.jsonl"));
            let quarantine_path = a.out.join("quarantine").join(format!("{key}.jsonl"));
            write_jsonl(&samples_path, &outcome.samples).map_err(anyhow::Error::from)?;
            write_jsonl(&quarantine_path, &outcome.quarantine).map_err(anyhow::Error::from)?;
            let st = &outcome.stats;
            println!(
                "{key}: {} samples, {} quarantined, {} repaired, {} retried -> {}",
                st.samples,
                st.quarantined,
                st.repaired,
                st.retried,
                samples_path.display()
            );
            write_summary(
                &a.out,
                &StageSummary {
                    stage: StageKind::GenAlign,
                    key: key.clone(),
                    outputs: vec![relative(&a.out, &samples_path), relative(&a.out, &quarantine_path)],
                    details: serde_json::to_value(st).expect("stats serialize"),
                    aborted: outcome.aborted.clone(),
                },
            )?;
            if let Some(reason) = outcome.aborted {
                return Err(CliError::Runtime(anyhow!(
                    "{key}: stopped after {} of {} sentences: {reason}",
                    st.sentences - st.unprocessed,
                    st.sentences
                )));
            }
        }
    }
    Ok(())
}

fn cmd_build_curriculum(env: &Env, a: &BuildCurriculumArgs) -> CliResult {
    let src = a.alignment.clone().unwrap_or_else(|| a.out.join("alignment"));
    let mut samples: Vec<AlignmentSample> = Vec::new();
    for p in jsonl_inputs(&src)? {
        samples.extend(read_jsonl::<AlignmentSample>(&p).map_err(anyhow::Error::from)?);
    }
    let spec = env.cfg.split.spec();
    let splits = split(samples, &spec).map_err(usage)?;
    let root = a.out.join("curriculum");
    let mut split_paths = Vec::new();
    for (name, part) in [("train", &splits.train), ("val", &splits.val), ("test", &splits.test)] {
        let p = root.join("splits").join(format!("{name}.jsonl"));
        write_jsonl(&p, part).map_err(anyhow::Error::from)?;
        split_paths.push(relative(&a.out, &p));
    }
    let hyper = Hyperparameters { seed: spec.seed, ..Default::default() };
    for &kind in &a.regime {
        let data = build_regime(&splits.train, kind).map_err(anyhow::Error::from)?;
        let dir = root.join(kind.as_str());
        let emitted = emit_plan(kind, &data, hyper.clone(), &dir).map_err(anyhow::Error::from)?;
        let stages: Vec<String> = emitted.plan.stages.iter().map(|s| format!("{}x{}", s.label, s.epochs)).collect();
        println!("{kind}: stages [{}] -> {}", stages.join(", "), emitted.plan_path.display());
        let mut outputs = vec![relative(&a.out, &emitted.plan_path)];
        outputs.extend(emitted.plan.stages.iter().map(|s| relative(&a.out, &dir.join(&s.path))));
        outputs.extend(split_paths.iter().cloned());
        write_summary(
            &a.out,
            &StageSummary {
                stage: StageKind::BuildCurriculum,
                key: kind.as_str().into(),
                outputs,
                details: json!({
                    "train": splits.train.len(),
                    "val": splits.val.len(),
                    "test": splits.test.len(),
                    "seed": spec.seed,
                    "records": emitted.record_counts.iter().map(|(l, n)| json!({"label": l, "count": n})).collect::<Vec<_>>(),
                }),
                aborted: None,
            },
        )?;
    }
    Ok(())
}

async fn similarities(
    env: &Env,
    preds: &[&PredictionRecord],
    golds: &[&GoldRecord],
    task: TaskKind,
) -> Option<std::collections::HashMap<String, f64>> {
    let endpoint = env.cfg.embedding.endpoint.as_deref()?;
    let model = env.cfg.embedding.model.as_deref().unwrap_or("text-embedding");
    let client = match http_client(&env.cfg, Duration::from_secs(60)) {
        Ok(c) => c,
        Err(e) => {
            tracing::warn!(error = %e, "similarity unavailable");
            return None;
        }
    };
    let client = EmbeddingClient::new(client, endpoint, model, env.cfg.llm.api_key.clone());
    let by_id: std::collections::HashMap<&str, &GoldRecord> = golds.iter().map(|g| (g.id.as_str(), *g)).collect();
    let pairs: Vec<(String, String, String)> = preds
        .iter()
        .filter_map(|p| {
            let g = by_id.get(p.id.as_str())?;
            let out = p.to_output(task, &env.taxonomy).ok()?;
            Some((p.id.clone(), out.think_text, g.explanation.clone()))
        })
        .collect();
    match client.similarities(&pairs).await {
        Ok(m) => Some(m),
        Err(e) => {
            tracing::warn!(error = %e, "similarity unavailable");
            None
        }
    }
}

async fn cmd_evaluate(env: &Env, a: &EvaluateArgs) -> CliResult {
    let golds: Vec<GoldRecord> = read_jsonl(&a.gold).map_err(anyhow::Error::from)?;
    let preds: Vec<PredictionRecord> = read_jsonl(&a.pred).map_err(anyhow::Error::from)?;
    let gold_ids: HashSet<&str> = golds.iter().map(|g| g.id.as_str()).collect();
    let stray: Vec<&str> = preds.iter().map(|p| p.id.as_str()).filter(|id| !gold_ids.contains(id)).collect();
    if !stray.is_empty() {
        return Err(CliError::Runtime(anyhow!("predictions without a gold record: {}", stray.join(", "))));
    }
    let tasks: Vec<TaskKind> = match a.task {
        Some(t) => vec![t],
        None => TaskKind::ALL.into_iter().filter(|t| golds.iter().any(|g| g.task == *t)).collect(),
    };
    let policy = if a.exclude_degenerate { DegeneratePolicy::Exclude } else { DegeneratePolicy::Include };
    for task in tasks {
        let g: Vec<&GoldRecord> = golds.iter().filter(|g| g.task == task).collect();
        let ids: HashSet<&str> = g.iter().map(|g| g.id.as_str()).collect();
        let p: Vec<&PredictionRecord> = preds.iter().filter(|p| ids.contains(p.id.as_str())).collect();
        let sims = if a.no_similarity { None } else { similarities(env, &p, &g, task).await };
        let opts = EvaluateOptions { degenerate_policy: policy, similarities: sims.as_ref() };
        let owned_g: Vec<GoldRecord> = g.into_iter().cloned().collect();
        let owned_p: Vec<PredictionRecord> = p.into_iter().cloned().collect();
        let ev = evaluate(&owned_p, &owned_g, task, &env.taxonomy, &opts).map_err(|e| anyhow!("{task}: {e}"))?;

        let dir = a.out.join("evaluation");
        let report_path = dir.join(format!("{task}.json"));
        let samples_path = dir.join(format!("{task}-samples.jsonl"));
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut text = serde_json::to_string_pretty(&ev.report).expect("report serializes");
        text.push('\n');
        std::fs::write(&report_path, text).with_context(|| format!("writing {}", report_path.display()))?;
        write_jsonl(&samples_path, &ev.per_sample).map_err(anyhow::Error::from)?;
        let r = &ev.report;
        println!(
            "{task}: SRC {} Jaccard {:.4} (evaluated {}, skipped {}, degenerate {})",
            r.src_display(),
            r.jaccard_mean,
            r.n_evaluated,
            r.n_skipped,
            r.n_degenerate
        );
        write_summary(
            &a.out,
            &StageSummary {
                stage: StageKind::Evaluate,
                key: task.as_str().into(),
                outputs: vec![relative(&a.out, &report_path), relative(&a.out, &samples_path)],
                details: json!({ "report": r }),
                aborted: None,
            },
        )?;
    }
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> CliResult {
    let r = report::collect(&a.run_dir, a.allow_partial).map_err(anyhow::Error::from)?;
    let (text, ext) = match a.format {
        ReportFormat::Json => (report::to_json(&r), "json"),
        ReportFormat::Html => (report::to_html(&r), "html"),
    };
    match &a.output {
        Some(p) if p.as_os_str() == "-" => print!("{text}"),
        other => {
            let path = other.clone().unwrap_or_else(|| a.run_dir.join(format!("report.{ext}")));
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            println!("{}", path.display());
        }
    }
    Ok(())
}
