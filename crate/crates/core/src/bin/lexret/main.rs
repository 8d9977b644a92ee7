// SPDX-License-Identifier: Apache-2.0

//! `lexret` command-line entry point.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error. Failures print a
//! single JSON line `{"error":{"kind":..,"command":..,"message":..}}` on stderr.

mod config;

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use lexret::analysis::{AnalyzerConfig, StopwordList};
use lexret::caption::{
    self, caption_dataset, load_captions, save_captions, CaptionCache, CaptionClient, ClientConfig, Progress,
};
use lexret::clipscore::{sweep_patterns, ClipScoreConfig};
use lexret::crops::CropPattern;
use lexret::dataset::{load_coco, load_jsonl, Dataset};
use lexret::embeddings::load_embeddings;
use lexret::eval::{
    self, run_caption_scenario, run_feedback_scenario, run_keyword_scenario, run_multikeyword_scenario, term_histogram,
    DenseRetriever, EvalReport, Retriever, SparseRetriever,
};
use lexret::index::{load_index, save_index, InvertedIndex};
use lexret::query::compose_query;
use lexret::service::{self, ServiceConfig, SnapshotSources};

use config::{existing_dir, existing_file, required, writable, FileConfig, UsageError};

#[derive(Parser)]
#[command(name = "lexret", version, about = "Lexical image retrieval over M-LLM captions")]
struct Cli {
    /// TOML config file; flags and environment variables take precedence.
    #[arg(long, global = true, env = "LEXRET_CONFIG")]
    config: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "LEXRET_JOBS")]
    jobs: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Caption images (and crops) with a vision-language endpoint.
    Caption(CaptionArgs),
    /// Build an inverted index from a captions JSONL file.
    Index(IndexArgs),
    /// Query an index and print a ranked table.
    Search(SearchArgs),
    /// Run an evaluation scenario and write a report.
    Eval(EvalArgs),
    /// Averaged CLIPScore sweep over crop patterns.
    Clipscore(ClipscoreArgs),
    /// Term frequency histogram over captions.
    Stats(StatsArgs),
    /// Serve the HTTP search API.
    Serve(ServeArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Caption(_) => "caption",
            Command::Index(_) => "index",
            Command::Search(_) => "search",
            Command::Eval(_) => "eval",
            Command::Clipscore(_) => "clipscore",
            Command::Stats(_) => "stats",
            Command::Serve(_) => "serve",
        }
    }
}

#[derive(Args)]
struct DatasetArgs {
    /// Dataset JSONL (`image_id`, `path`, `labels`, `captions`).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// COCO instances JSON, used instead of --dataset.
    #[arg(long, conflicts_with = "dataset")]
    coco_instances: Option<PathBuf>,
    /// COCO captions JSON accompanying --coco-instances.
    #[arg(long, requires = "coco_instances")]
    coco_captions: Option<PathBuf>,
}

impl DatasetArgs {
    fn resolve(self, cfg: &FileConfig) -> Result<DatasetSource, UsageError> {
        if let Some(instances) = self.coco_instances {
            let captions = self.coco_captions.map(|p| existing_file(p, "coco-captions")).transpose()?;
            return Ok(DatasetSource::Coco(existing_file(instances, "coco-instances")?, captions));
        }
        let path = required(self.dataset.or_else(|| cfg.dataset.clone()), "dataset")?;
        Ok(DatasetSource::Jsonl(existing_file(path, "dataset")?))
    }
}

enum DatasetSource {
    Jsonl(PathBuf),
    Coco(PathBuf, Option<PathBuf>),
}

impl DatasetSource {
    fn load(&self) -> Result<Dataset> {
        Ok(match self {
            DatasetSource::Jsonl(p) => load_jsonl(p).with_context(|| format!("loading {}", p.display()))?,
            DatasetSource::Coco(i, c) => load_coco(i, c.as_deref()).with_context(|| format!("loading {}", i.display()))?,
        })
    }
}

#[derive(Args)]
struct CaptionArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Output captions JSONL.
    #[arg(long)]
    out: PathBuf,
    /// Crop pattern: none, crops17 or crops40.
    #[arg(long)]
    pattern: Option<String>,
    /// JSON file with a custom crop pattern.
    #[arg(long, conflicts_with = "pattern")]
    pattern_file: Option<PathBuf>,
    /// Chat-completions endpoint URL.
    #[arg(long, env = "LEXRET_ENDPOINT")]
    endpoint: Option<String>,
    #[arg(long, env = "LEXRET_MODEL")]
    model: Option<String>,
    #[arg(long, env = "LEXRET_API_KEY", hide_env_values = true)]
    api_key: Option<String>,
    /// Prompt text.
    #[arg(long)]
    prompt: Option<String>,
    /// Prompt preset: captions, tags or follow-up.
    #[arg(long, conflicts_with = "prompt")]
    prompt_preset: Option<String>,
    /// Directory image paths are relative to.
    #[arg(long)]
    image_root: Option<PathBuf>,
    /// Response cache directory (default: `.caption-cache` next to --out).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Failure list (default: `<out>.failures.jsonl`).
    #[arg(long)]
    quarantine: Option<PathBuf>,
    #[arg(long)]
    max_attempts: Option<u32>,
    #[arg(long)]
    timeout_secs: Option<u64>,
    /// Caption only the first N images.
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Args)]
struct IndexArgs {
    #[arg(long)]
    captions: Option<PathBuf>,
    /// Output index file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    no_stemming: bool,
    /// Stopword list: english_v1 or none.
    #[arg(long, default_value = "english_v1")]
    stopwords: String,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    index: Option<PathBuf>,
    /// Free-text query.
    #[arg(long, default_value = "")]
    query: String,
    /// Keyword appended to the query (repeatable).
    #[arg(long = "keyword")]
    keywords: Vec<String>,
    #[arg(short, long, default_value_t = 10)]
    k: usize,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    Keyword,
    #[value(alias = "multi_keyword")]
    MultiKeyword,
    Caption,
    Feedback,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_enum)]
    scenario: Scenario,
    #[command(flatten)]
    data: DatasetArgs,
    /// Sparse index to evaluate.
    #[arg(long)]
    index: Option<PathBuf>,
    /// Precomputed embeddings; evaluates dense retrieval instead of --index.
    #[arg(long, conflicts_with = "index")]
    embeddings: Option<PathBuf>,
    /// Comma-separated k values overriding the powers-of-two sweep.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Feedback steps (default: the largest label count).
    #[arg(long)]
    max_steps: Option<usize>,
    /// Report JSON (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Precision/recall CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ClipscoreArgs {
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Texts to score against, one per line.
    #[arg(long)]
    texts: Option<PathBuf>,
    /// Use the dataset's label vocabulary as texts.
    #[arg(long, conflicts_with = "texts")]
    label_texts: bool,
    #[command(flatten)]
    data: DatasetArgs,
    /// Patterns to sweep, smallest first.
    #[arg(long, value_delimiter = ',', default_value = "none,crops17,crops40")]
    patterns: Vec<String>,
    #[arg(long, default_value_t = 0.001)]
    epsilon: f64,
    #[arg(long, default_value_t = 2.5)]
    w: f64,
    /// Sweep report JSON (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-image scores of every pattern, sorted descending.
    #[arg(long)]
    per_image_csv: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// Captions JSONL (whole documents are counted).
    #[arg(long)]
    captions: Option<PathBuf>,
    /// Dataset JSONL (its ground-truth captions are counted).
    #[arg(long, conflicts_with = "captions")]
    dataset: Option<PathBuf>,
    #[arg(long, default_value_t = eval::DEFAULT_TOP_N)]
    top_n: usize,
    /// Stem terms before counting.
    #[arg(long)]
    stemming: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "LEXRET_INDEX")]
    index: Option<PathBuf>,
    #[arg(long)]
    captions: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    image_dir: Option<PathBuf>,
    #[arg(long)]
    host: Option<String>,
    #[arg(long, env = "LEXRET_PORT")]
    port: Option<u16>,
    /// Allowed CORS origin (repeatable; `*` for any).
    #[arg(long = "cors-origin")]
    cors_origins: Vec<String>,
    #[arg(long, env = "LEXRET_ADMIN_TOKEN", hide_env_values = true)]
    admin_token: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let command = cli.command.name();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let usage = err.downcast_ref::<UsageError>().is_some();
            let line = serde_json::json!({"error": {
                "kind": if usage { "usage" } else { "runtime" },
                "command": command,
                "message": format!("{err:#}"),
            }});
            eprintln!("{line}");
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let jobs = cli.jobs.or(cfg.jobs);
    if let Some(n) = jobs {
        if n == 0 {
            return Err(UsageError("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Caption(a) => cmd_caption(a, &cfg, jobs),
        Command::Index(a) => cmd_index(a, &cfg),
        Command::Search(a) => cmd_search(a, &cfg),
        Command::Eval(a) => cmd_eval(a, &cfg),
        Command::Clipscore(a) => cmd_clipscore(a, &cfg),
        Command::Stats(a) => cmd_stats(a, &cfg),
        Command::Serve(a) => cmd_serve(a, &cfg, jobs),
    }
}

fn runtime(jobs: Option<usize>) -> Result<tokio::runtime::Runtime> {
    let mut b = tokio::runtime::Builder::new_multi_thread();
    if let Some(n) = jobs {
        b.worker_threads(n);
    }
    Ok(b.enable_all().build()?)
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn cmd_caption(a: CaptionArgs, cfg: &FileConfig, jobs: Option<usize>) -> Result<()> {
    let data = a.data.resolve(cfg)?;
    let out = writable(a.out, "out")?;
    let image_root = a
        .image_root
        .or_else(|| cfg.image_root.clone())
        .map(|p| existing_dir(p, "image-root"))
        .transpose()?;
    let pattern = match a.pattern_file {
        Some(p) => {
            let text = std::fs::read_to_string(existing_file(p, "pattern-file")?)?;
            let pattern: CropPattern = serde_json::from_str(&text).context("parsing --pattern-file")?;
            CropPattern::custom(pattern.name, pattern.grids)?
        }
        None => {
            let name = a.pattern.or_else(|| cfg.pattern.clone()).unwrap_or_else(|| "none".into());
            CropPattern::by_name(&name).map_err(|e| UsageError(format!("--pattern: {e}")))?
        }
    };
    let prompt = match a.prompt_preset {
        Some(name) => caption::prompt_preset(&name)
            .ok_or_else(|| UsageError(format!("--prompt-preset: unknown preset `{name}`")))?
            .to_owned(),
        None => a
            .prompt
            .or_else(|| cfg.prompt.clone())
            .unwrap_or_else(|| caption::DEFAULT_PROMPT.to_owned()),
    };
    let endpoint = required(a.endpoint.or_else(|| cfg.endpoint.clone()), "endpoint")?;
    let model = required(a.model.or_else(|| cfg.model.clone()), "model")?;
    let cache_dir = a.cache_dir.or_else(|| cfg.cache_dir.clone()).unwrap_or_else(|| {
        out.parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .join(".caption-cache")
    });
    let quarantine = writable(
        a.quarantine.unwrap_or_else(|| {
            let mut name = out.as_os_str().to_owned();
            name.push(".failures.jsonl");
            PathBuf::from(name)
        }),
        "quarantine",
    )?;

    let dataset = data.load()?;
    let records = &dataset.records()[..a.limit.unwrap_or(usize::MAX).min(dataset.len())];
    let mut client_cfg = ClientConfig::new(endpoint, model);
    client_cfg.api_key = a.api_key.or_else(|| cfg.api_key.clone());
    if let Some(n) = a.max_attempts.or(cfg.max_attempts) {
        client_cfg.retry.max_attempts = n.max(1);
    }
    if let Some(s) = a.timeout_secs.or(cfg.timeout_secs) {
        client_cfg.timeout = Duration::from_secs(s);
    }
    let cache = CaptionCache::open(&cache_dir).with_context(|| format!("opening cache {}", cache_dir.display()))?;
    let client = CaptionClient::new(client_cfg, Some(cache))?;
    let concurrency = jobs.unwrap_or(4);

    let progress = |p: Progress<'_>| {
        log::info!("[{}/{}] {} {}", p.done, p.total, p.image_id, if p.ok { "ok" } else { "FAILED" });
    };
    let run = runtime(jobs)?.block_on(caption_dataset(
        records,
        &pattern,
        &client,
        &prompt,
        image_root.as_deref(),
        concurrency,
        &progress,
    ));
    save_captions(&run.documents, &out)?;
    eprintln!(
        "captioned {} of {} images ({} requests, {} cache hits)",
        run.documents.len(),
        records.len(),
        client.network_calls(),
        client.cache_hits()
    );
    if run.failures.is_empty() {
        if quarantine.exists() {
            std::fs::remove_file(&quarantine)?;
        }
        return Ok(());
    }
    let mut q = BufWriter::new(File::create(&quarantine)?);
    for f in &run.failures {
        serde_json::to_writer(&mut q, f)?;
        q.write_all(b"\n")?;
    }
    q.flush()?;
    bail!(
        "{} images failed; listed in {}",
        run.failures.iter().map(|f| &f.image_id).collect::<HashSet<_>>().len(),
        quarantine.display()
    )
}

fn parse_stopwords(s: &str) -> Result<StopwordList, UsageError> {
    serde_json::from_value(serde_json::Value::String(s.to_owned()))
        .map_err(|_| UsageError(format!("--stopwords: unknown list `{s}` (english_v1, none)")))
}

fn cmd_index(a: IndexArgs, cfg: &FileConfig) -> Result<()> {
    let captions = existing_file(required(a.captions.or_else(|| cfg.captions.clone()), "captions")?, "captions")?;
    let out = writable(a.out, "out")?;
    let analyzer = AnalyzerConfig {
        stemming: !a.no_stemming,
        stopwords: parse_stopwords(&a.stopwords)?,
        ..AnalyzerConfig::default()
    };
    let docs = load_captions(&captions)?;
    let index = InvertedIndex::build(&docs, analyzer)?;
    save_index(&index, &out)?;
    eprintln!(
        "indexed {} documents, {} terms -> {}",
        index.n_docs(),
        index.n_terms(),
        out.display()
    );
    Ok(())
}

fn load_index_arg(path: Option<PathBuf>, cfg: &FileConfig) -> Result<PathBuf, UsageError> {
    existing_file(required(path.or_else(|| cfg.index.clone()), "index")?, "index")
}

fn cmd_search(a: SearchArgs, cfg: &FileConfig) -> Result<()> {
    let path = load_index_arg(a.index, cfg)?;
    if a.k < 1 {
        return Err(UsageError("-k must be at least 1".into()).into());
    }
    let query = compose_query(&a.query, &a.keywords);
    if query.is_empty() {
        return Err(UsageError("empty query".into()).into());
    }
    let index = load_index(&path)?;
    let result = index.search(&query, a.k)?;
    let mut out = open_out(None)?;
    if a.json {
        let rows: Vec<_> = result
            .hits
            .iter()
            .enumerate()
            .map(|(i, h)| serde_json::json!({"rank": i + 1, "image_id": index.image_id(h.doc), "score": h.score}))
            .collect();
        writeln!(out, "{}", serde_json::json!({"query": query, "total_hits": result.total_hits, "results": rows}))?;
    } else {
        writeln!(out, "rank\timage_id\tscore")?;
        for (i, h) in result.hits.iter().enumerate() {
            writeln!(out, "{}\t{}\t{:.6}", i + 1, index.image_id(h.doc).unwrap_or("?"), h.score)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_eval(a: EvalArgs, cfg: &FileConfig) -> Result<()> {
    let data = a.data.resolve(cfg)?;
    let embeddings = a.embeddings.map(|p| existing_file(p, "embeddings")).transpose()?;
    let index_path = match embeddings {
        Some(_) => None,
        None => Some(load_index_arg(a.index, cfg)?),
    };
    let out = a.out.map(|p| writable(p, "out")).transpose()?;
    let csv = a.csv.map(|p| writable(p, "csv")).transpose()?;
    if let Some(ks) = &a.k {
        if ks.is_empty() || ks.contains(&0) {
            return Err(UsageError("--k values must be at least 1".into()).into());
        }
    }

    let dataset = data.load()?;
    let index;
    let retriever: Box<dyn Retriever> = match (&index_path, &embeddings) {
        (Some(p), _) => {
            index = load_index(p)?;
            Box::new(SparseRetriever::new(&index))
        }
        (None, Some(p)) => Box::new(DenseRetriever::new(load_embeddings(p)?)),
        (None, None) => unreachable!("one retriever source is required"),
    };
    let ks = a.k.as_deref();
    let (json, report): (String, EvalReport) = match a.scenario {
        Scenario::Keyword => wrap(run_keyword_scenario(&dataset, retriever.as_ref(), ks)?),
        Scenario::MultiKeyword => wrap(run_multikeyword_scenario(&dataset, retriever.as_ref(), ks)?),
        Scenario::Caption => wrap(run_caption_scenario(&dataset, retriever.as_ref(), ks)?),
        Scenario::Feedback => {
            let steps = a
                .max_steps
                .unwrap_or_else(|| dataset.records().iter().map(|r| r.labels.len()).max().unwrap_or(0));
            let outcome = run_feedback_scenario(&dataset, retriever.as_ref(), steps, ks)?;
            let mut json = serde_json::to_string_pretty(&outcome)?;
            json.push('\n');
            (json, outcome.all_labels)
        }
    };
    let mut w = open_out(out.as_deref())?;
    w.write_all(json.as_bytes())?;
    w.flush()?;
    if let Some(p) = csv {
        let mut w = open_out(Some(&p))?;
        report.write_csv(&mut w)?;
        w.flush()?;
    }
    eprintln!(
        "{} / {}: {} queries, PR-AUC {}",
        report.scenario,
        report.retriever,
        report.n_queries,
        report.pr_auc.map_or("n/a".into(), |v| format!("{v:.4}"))
    );
    Ok(())
}

fn wrap(report: EvalReport) -> (String, EvalReport) {
    (report.to_json(), report)
}

fn cmd_clipscore(a: ClipscoreArgs, cfg: &FileConfig) -> Result<()> {
    let emb_path = existing_file(required(a.embeddings.or_else(|| cfg.embeddings.clone()), "embeddings")?, "embeddings")?;
    let texts_path = a.texts.map(|p| existing_file(p, "texts")).transpose()?;
    let has_dataset = a.data.dataset.is_some() || a.data.coco_instances.is_some() || cfg.dataset.is_some();
    let data = if has_dataset { Some(a.data.resolve(cfg)?) } else { None };
    if a.label_texts && data.is_none() {
        return Err(UsageError("--label-texts needs a dataset".into()).into());
    }
    if texts_path.is_none() && !a.label_texts {
        return Err(UsageError("give --texts or --label-texts".into()).into());
    }
    if a.epsilon.is_nan() || a.epsilon < 0.0 || a.w.is_nan() || a.w <= 0.0 {
        return Err(UsageError("--epsilon must be >= 0 and --w > 0".into()).into());
    }
    let patterns = a
        .patterns
        .iter()
        .map(|n| CropPattern::by_name(n).map_err(|e| UsageError(format!("--patterns: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let out = a.out.map(|p| writable(p, "out")).transpose()?;
    let per_image_csv = a.per_image_csv.map(|p| writable(p, "per-image-csv")).transpose()?;

    let store = load_embeddings(&emb_path)?;
    let dataset = data.map(|d| d.load()).transpose()?;
    let texts: Vec<String> = match &texts_path {
        Some(p) => std::fs::read_to_string(p)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect(),
        None => dataset
            .as_ref()
            .map(|d| d.label_vocabulary().iter().cloned().collect())
            .unwrap_or_default(),
    };
    let image_ids: Vec<String> = match &dataset {
        Some(d) => d.records().iter().map(|r| r.image_id.clone()).collect(),
        None => store.image_ids(),
    };
    let sweep = sweep_patterns(&image_ids, &patterns, &texts, &store, ClipScoreConfig { w: a.w }, a.epsilon)?;
    let mut w = open_out(out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &sweep)?;
    w.write_all(b"\n")?;
    w.flush()?;
    if let Some(p) = per_image_csv {
        let mut w = open_out(Some(&p))?;
        writeln!(w, "pattern,rank,image_id,score")?;
        for e in &sweep.entries {
            for (i, (id, s)) in e.per_image_descending().iter().enumerate() {
                writeln!(w, "{},{},{id},{s}", e.pattern, i + 1)?;
            }
        }
        w.flush()?;
    }
    eprintln!("selected pattern: {}", sweep.selected);
    Ok(())
}

fn cmd_stats(a: StatsArgs, cfg: &FileConfig) -> Result<()> {
    let docs: Vec<String> = if let Some(p) = a.dataset {
        let d = load_jsonl(existing_file(p, "dataset")?)?;
        d.records().iter().flat_map(|r| r.captions.iter().cloned()).collect()
    } else {
        let p = existing_file(required(a.captions.or_else(|| cfg.captions.clone()), "captions")?, "captions")?;
        load_captions(p)?.iter().map(|d| d.concatenated()).collect()
    };
    let analyzer = if a.stemming {
        AnalyzerConfig::default()
    } else {
        AnalyzerConfig::display()
    };
    let hist = term_histogram(&docs, a.top_n, &analyzer);
    let mut out = open_out(None)?;
    if a.json {
        let rows: Vec<_> = hist
            .iter()
            .map(|(t, c)| serde_json::json!({"term": t, "count": c}))
            .collect();
        writeln!(out, "{}", serde_json::Value::Array(rows))?;
    } else {
        writeln!(out, "term\tcount")?;
        for (t, c) in &hist {
            writeln!(out, "{t}\t{c}")?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_serve(a: ServeArgs, cfg: &FileConfig, jobs: Option<usize>) -> Result<()> {
    let index = Some(load_index_arg(a.index, cfg)?);
    let captions = a
        .captions
        .or_else(|| cfg.captions.clone())
        .map(|p| existing_file(p, "captions"))
        .transpose()?;
    let dataset = a
        .dataset
        .or_else(|| cfg.dataset.clone())
        .map(|p| existing_file(p, "dataset"))
        .transpose()?;
    let image_dir = a
        .image_dir
        .or_else(|| cfg.image_dir.clone())
        .map(|p| existing_dir(p, "image-dir"))
        .transpose()?;
    let host = a.host.or_else(|| cfg.host.clone()).unwrap_or_else(|| "127.0.0.1".into());
    let port = a.port.or(cfg.port).unwrap_or(8080);
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|_| UsageError(format!("invalid address {host}:{port}")))?;
    let cors_origins = if a.cors_origins.is_empty() {
        cfg.cors_origins.clone()
    } else {
        a.cors_origins
    };
    let config = ServiceConfig {
        sources: SnapshotSources {
            index,
            captions,
            dataset,
        },
        image_dir,
        cors_origins,
        admin_token: a.admin_token.or_else(|| cfg.admin_token.clone()),
    };
    eprintln!("serving on http://{addr}");
    runtime(jobs)?.block_on(service::serve(config, addr))?;
    Ok(())
}
