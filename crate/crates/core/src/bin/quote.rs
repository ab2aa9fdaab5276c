use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use quote_core::builder::{build_index, BuildOptions, GenerationErrorPolicy};
use quote_core::config::{
    build_embedder, build_generator, embedder_for_index, ConfigLayer, EmbedderConfig,
    GeneratorConfig, Settings, DEFAULT_DIM, DEFAULT_TIMEOUT_SECONDS,
};
use quote_core::corpus::{
    merge_similar_chunks, read_documents_jsonl, singleton_groups, split_corpus, write_chunks_jsonl,
    Chunk, ChunkGroup, ChunkingPolicy, Document, MergeScope, MergeSettings,
};
use quote_core::datasets::{self, DatasetKind};
use quote_core::eval::{self, ChunkCatalog, EvalReport};
use quote_core::question_gen::{PromptTemplate, QuestionBudget, TemplateName};
use quote_core::retrieval::{HydeTarget, RetrievalConfig, RetrievalMode, Retriever};
use quote_core::store::{Composition, DocKind, IndexManifest, VectorStore};
use quote_core::{Error, Result};

#[derive(Parser)]
#[command(name = "quote", version, about = "Question-oriented indexing and retrieval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Chunk a corpus, generate questions and write an index.
    Build(BuildArgs),
    /// Retrieve contexts for one or more queries.
    Query(QueryArgs),
    /// Evaluate an index against a benchmark dataset.
    Eval(EvalArgs),
    /// Contexts-per-title distribution and bucketed Top-1 accuracy.
    Analyze(AnalyzeArgs),
    /// Print an index manifest and document counts.
    Inspect {
        #[arg(long)]
        index: PathBuf,
    },
    /// Print the chunks of a corpus as JSON lines.
    Chunk {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_parser = parse_chunking)]
        chunking: Option<ChunkingPolicy>,
    },
}

#[derive(Args)]
struct InputArgs {
    /// JSONL corpus with `doc_id`, `title` and `body` per line.
    #[arg(long, conflicts_with = "dataset")]
    corpus: Option<PathBuf>,
    #[arg(long, value_enum)]
    dataset: Option<DatasetArg>,
    /// Dataset file, or directory for multihop.
    #[arg(long, requires = "dataset")]
    data: Option<PathBuf>,
    /// Separate multihop query file.
    #[arg(long)]
    queries: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum DatasetArg {
    Squad,
    Nq,
    Multihop,
}

impl From<DatasetArg> for DatasetKind {
    fn from(d: DatasetArg) -> Self {
        match d {
            DatasetArg::Squad => DatasetKind::Squad,
            DatasetArg::Nq => DatasetKind::Nq,
            DatasetArg::Multihop => DatasetKind::Multihop,
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum GeneratorKind {
    Mock,
    Http,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum EmbedderKind {
    Mock,
    TokenHash,
    Http,
}

#[derive(Args, Default)]
struct BackendArgs {
    /// JSON config file; flags override it, it overrides QUOTE_* variables.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    generator: Option<GeneratorKind>,
    #[arg(long)]
    generator_url: Option<String>,
    #[arg(long)]
    generator_model: Option<String>,
    /// Questions the mock generator emits when the prompt sets no count.
    #[arg(long)]
    mock_questions: Option<usize>,
    /// Artificial latency of every mock generator call.
    #[arg(long)]
    mock_delay_ms: Option<u64>,
    #[arg(long, value_enum)]
    embedder: Option<EmbedderKind>,
    #[arg(long)]
    embedder_url: Option<String>,
    #[arg(long)]
    embedder_model: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    /// Environment variable holding the API key for http backends.
    #[arg(long)]
    api_key_env: Option<String>,
    /// Worker threads; defaults to the logical CPU count, 1 is fully serial.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    retries: Option<u32>,
}

impl BackendArgs {
    fn settings(&self) -> Result<Settings> {
        let file = self.config.as_deref().map(ConfigLayer::from_file).transpose()?;
        let env = ConfigLayer::from_env()?;
        let lower = env.clone().under(file.clone().unwrap_or_default());

        let generator = match self.generator {
            None if self.mock_questions.is_some() || self.mock_delay_ms.is_some() => {
                Some(GeneratorKind::Mock)
            }
            g => g,
        };
        let generator = generator.map(|g| -> Result<GeneratorConfig> { match g {
            GeneratorKind::Mock => Ok(GeneratorConfig::Mock {
                default_count: self.mock_questions.unwrap_or(5),
                delay_ms: self.mock_delay_ms.unwrap_or(0),
            }),
            GeneratorKind::Http => Ok(GeneratorConfig::Http {
                base_url: required(&self.generator_url, "--generator-url")?,
                model: required(&self.generator_model, "--generator-model")?,
                api_key_env: self.api_key_env.clone(),
                timeout_seconds: DEFAULT_TIMEOUT_SECONDS,
                temperature: 0.0,
            }),
        }});
        let embedder = match (self.embedder, self.dim) {
            (None, Some(dim)) => Some(match &lower.embedder {
                Some(EmbedderConfig::Mock { salt, .. }) => Ok(EmbedderConfig::Mock { dim, salt: *salt }),
                Some(EmbedderConfig::Http { .. }) => Err(Error::InvalidInput(
                    "--dim without --embedder cannot change an http embedder".into(),
                )),
                _ => Ok(EmbedderConfig::TokenHash { dim, salt: 0 }),
            }),
            (Some(kind), dim) => Some(match kind {
                EmbedderKind::Mock => Ok(EmbedderConfig::Mock {
                    dim: dim.unwrap_or(DEFAULT_DIM),
                    salt: 0,
                }),
                EmbedderKind::TokenHash => Ok(EmbedderConfig::TokenHash {
                    dim: dim.unwrap_or(DEFAULT_DIM),
                    salt: 0,
                }),
                EmbedderKind::Http => Ok(EmbedderConfig::Http {
                    base_url: required(&self.embedder_url, "--embedder-url")?,
                    model: required(&self.embedder_model, "--embedder-model")?,
                    dimension: dim.ok_or_else(|| {
                        Error::InvalidInput("--dim is required for an http embedder".into())
                    })?,
                    api_key_env: self.api_key_env.clone(),
                    timeout_seconds: DEFAULT_TIMEOUT_SECONDS,
                }),
            }),
            (None, None) => None,
        };
        let flags = ConfigLayer {
            generator: generator.transpose()?,
            embedder: embedder.transpose()?,
            workers: self.workers,
            batch_size: self.batch_size,
            retries: self.retries,
            retry_base_ms: None,
        };
        Settings::resolve(flags, file, env)
    }
}

fn required(v: &Option<String>, flag: &str) -> Result<String> {
    v.clone()
        .ok_or_else(|| Error::InvalidInput(format!("{flag} is required")))
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output index directory.
    #[arg(long)]
    index: PathBuf,
    /// Build report path; defaults to `<index>/build_report.json`.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value = "nq_squad_basic")]
    template: TemplateName,
    /// Custom template body; must contain `{chunk_text}` once.
    #[arg(long)]
    template_file: Option<PathBuf>,
    /// Questions per chunk, or `auto` to let the model decide.
    #[arg(long, default_value = "auto")]
    questions: QuestionBudget,
    /// Comma list of question_chunk, bare_chunk, question_only.
    #[arg(long, default_value = "question_chunk")]
    composition: Composition,
    /// `paragraph` or `sentences:N`; defaults by dataset.
    #[arg(long, value_parser = parse_chunking)]
    chunking: Option<ChunkingPolicy>,
    /// Merge near-duplicate chunks at this token-Jaccard threshold.
    #[arg(long)]
    merge_threshold: Option<f64>,
    #[arg(long, value_enum, default_value = "within-title")]
    merge_scope: ScopeArg,
    /// Append generated answers to the embedded question text.
    #[arg(long)]
    include_answers: bool,
    /// Seed for offline embedders, recorded in the manifest.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "skip")]
    on_generation_error: ErrorPolicyArg,
    /// Write every prompt and completion to this JSONL file.
    #[arg(long)]
    audit_log: Option<PathBuf>,
    #[command(flatten)]
    backends: BackendArgs,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ScopeArg {
    WithinTitle,
    Corpus,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ErrorPolicyArg {
    Skip,
    Abort,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum HydeTargetArg {
    Auto,
    Chunks,
    Questions,
}

impl From<HydeTargetArg> for HydeTarget {
    fn from(t: HydeTargetArg) -> Self {
        match t {
            HydeTargetArg::Auto => HydeTarget::Auto,
            HydeTargetArg::Chunks => HydeTarget::Chunks,
            HydeTargetArg::Questions => HydeTarget::Questions,
        }
    }
}

#[derive(Args)]
struct RetrievalArgs {
    #[arg(long, default_value = "quote")]
    mode: RetrievalMode,
    /// Over-retrieval multiplier for quote mode.
    #[arg(long, default_value_t = quote_core::retrieval::DEFAULT_MULTIPLIER)]
    m: usize,
    /// Re-query once with doubled M when dedup leaves fewer than k contexts.
    #[arg(long)]
    underfill_retry: bool,
    #[arg(long, value_enum, default_value = "auto")]
    hyde_target: HydeTargetArg,
    /// HyDE prompt; `{query}` is replaced by the query.
    #[arg(long)]
    hyde_prompt: Option<String>,
}

impl RetrievalArgs {
    fn config(&self, k: usize, settings: &Settings) -> Result<RetrievalConfig> {
        let mut c = RetrievalConfig::new(self.mode, k);
        c.multiplier = self.m;
        c.underfill_retry = self.underfill_retry;
        c.hyde_target = self.hyde_target.into();
        if let Some(p) = &self.hyde_prompt {
            c.hyde_prompt = p.clone();
        }
        if self.mode == RetrievalMode::Hyde {
            c.hyde_backend = Some(build_generator(&settings.generator)?);
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    index: PathBuf,
    /// Query text; omit to use --query-file.
    query: Option<String>,
    /// File with one query per line.
    #[arg(long, conflicts_with = "query")]
    query_file: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[command(flatten)]
    retrieval: RetrievalArgs,
    #[command(flatten)]
    backends: BackendArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_enum)]
    dataset: DatasetArg,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long)]
    index: PathBuf,
    /// Comma-separated, strictly ascending.
    #[arg(long, default_value = "1,5,10,20", value_delimiter = ',')]
    k: Vec<usize>,
    /// Evaluate only the first N queries.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    retrieval: RetrievalArgs,
    #[command(flatten)]
    backends: BackendArgs,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, value_enum)]
    dataset: DatasetArg,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Index whose chunking and merge settings define the contexts.
    #[arg(long)]
    index: PathBuf,
    /// Eval report JSON; repeat for each mode.
    #[arg(long = "report", required = true)]
    reports: Vec<PathBuf>,
    /// Bucket lower bounds.
    #[arg(long, value_delimiter = ',', default_values_t = eval::DEFAULT_BUCKET_EDGES)]
    buckets: Vec<usize>,
    /// Bucketed accuracy CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    histogram_csv: Option<PathBuf>,
}

fn parse_chunking(s: &str) -> std::result::Result<ChunkingPolicy, String> {
    let policy = match s.split_once(':') {
        None if s == "paragraph" => ChunkingPolicy::paragraph(),
        Some(("sentences", n)) => {
            ChunkingPolicy::sentence_blocks(n.parse().map_err(|_| format!("bad block size {n:?}"))?)
        }
        _ => return Err(format!("expected `paragraph` or `sentences:N`, got {s:?}")),
    };
    policy.validate().map_err(|e| e.to_string())?;
    Ok(policy)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Query(a) => cmd_query(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Inspect { index } => cmd_inspect(&index),
        Command::Chunk { input, chunking } => cmd_chunk(&input, chunking),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        // a closed pipe (`| head`) just ends the output
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_input(input: &InputArgs) -> Result<(Vec<Document>, Option<DatasetKind>)> {
    match (&input.corpus, input.dataset, &input.data) {
        (Some(path), None, _) => Ok((read_documents_jsonl(path)?, None)),
        (None, Some(kind), Some(data)) => {
            let kind = kind.into();
            Ok((datasets::load_documents(kind, data, input.queries.as_deref())?, Some(kind)))
        }
        (None, Some(_), None) => Err(Error::InvalidInput("--dataset requires --data".into())),
        _ => Err(Error::InvalidInput(
            "give either --corpus or --dataset with --data".into(),
        )),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n")?;
    Ok(())
}

fn cmd_chunk(input: &InputArgs, chunking: Option<ChunkingPolicy>) -> Result<()> {
    let (docs, kind) = load_input(input)?;
    let policy = chunking.unwrap_or_else(|| kind.map_or_else(ChunkingPolicy::default, |k| k.default_chunking()));
    let out = split_corpus(&docs, &policy)?;
    let stdout = io::stdout();
    write_chunks_jsonl(BufWriter::new(stdout.lock()), &out.chunks)
}

fn cmd_build(a: BuildArgs) -> Result<()> {
    let settings = a.backends.settings()?;
    let (docs, kind) = load_input(&a.input)?;
    let chunking = a
        .chunking
        .unwrap_or_else(|| kind.map_or_else(ChunkingPolicy::default, |k| k.default_chunking()));
    let split = split_corpus(&docs, &chunking)?;
    if split.chunks.is_empty() {
        return Err(Error::InvalidInput("corpus produced no chunks".into()));
    }

    let template = match &a.template_file {
        Some(path) => {
            let body = fs::read_to_string(path).map_err(|e| Error::load(path, e.to_string()))?;
            PromptTemplate::custom(a.template, body)?
        }
        None => PromptTemplate::builtin(a.template),
    };
    let embedder_config = seeded(settings.embedder.clone(), a.seed);
    let generator = build_generator(&settings.generator)?;
    let embedder = build_embedder(&embedder_config)?;

    let mut opts = BuildOptions::new(template, a.questions);
    opts.composition = a.composition;
    opts.include_answers = a.include_answers;
    opts.chunking = chunking;
    opts.merge = a.merge_threshold.map(|threshold| MergeSettings {
        threshold,
        scope: match a.merge_scope {
            ScopeArg::WithinTitle => MergeScope::WithinTitle,
            ScopeArg::Corpus => MergeScope::Corpus,
        },
    });
    opts.retry = settings.retry();
    opts.workers = settings.workers;
    opts.batch_size = settings.batch_size;
    opts.on_generation_error = match a.on_generation_error {
        ErrorPolicyArg::Skip => GenerationErrorPolicy::Skip,
        ErrorPolicyArg::Abort => GenerationErrorPolicy::Abort,
    };
    opts.seed = a.seed;
    opts.audit = a.audit_log.is_some();

    let out = build_index(&split.chunks, generator.as_ref(), embedder.as_ref(), &opts)?;
    out.store.save(&a.index)?;

    if let Some(path) = &a.audit_log {
        let mut w = BufWriter::new(fs::File::create(path)?);
        for rec in &out.audit {
            serde_json::to_writer(&mut w, rec).map_err(io::Error::other)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    let report = json!({
        "index": a.index,
        "embedder_id": out.store.manifest().embedder_id,
        "generator_id": out.store.manifest().generator_id,
        "skipped_documents": split.skipped_docs,
        "stats": out.stats,
    });
    let report_path = a.report.unwrap_or_else(|| a.index.join("build_report.json"));
    write_json(&report_path, &report)?;
    eprintln!(
        "indexed {} chunks ({} groups) as {} documents with {} questions in {:.2}s",
        out.stats.chunk_count,
        out.stats.group_count,
        out.stats.document_count,
        out.stats.question_count,
        out.stats.index_seconds
    );
    Ok(())
}

/// Apply `--seed` to offline embedders.
fn seeded(config: EmbedderConfig, seed: u64) -> EmbedderConfig {
    match config {
        EmbedderConfig::Mock { dim, salt } => EmbedderConfig::Mock {
            dim,
            salt: if seed == 0 { salt } else { seed },
        },
        EmbedderConfig::TokenHash { dim, salt } => EmbedderConfig::TokenHash {
            dim,
            salt: if seed == 0 { salt } else { seed },
        },
        other => other,
    }
}

fn open_index(path: &Path, settings: &Settings) -> Result<(VectorStore, Box<dyn quote_core::EmbedderBackend>)> {
    let store = VectorStore::load(path)?;
    let embedder = embedder_for_index(store.manifest(), Some(&settings.embedder))?;
    Ok((store, embedder))
}

fn cmd_query(a: QueryArgs) -> Result<()> {
    let settings = a.backends.settings()?;
    let queries: Vec<String> = match (&a.query, &a.query_file) {
        (Some(q), _) => vec![q.clone()],
        (None, Some(path)) => {
            let f = fs::File::open(path).map_err(|e| Error::load(path, e.to_string()))?;
            io::BufReader::new(f)
                .lines()
                .collect::<io::Result<Vec<_>>>()?
                .into_iter()
                .filter(|l| !l.trim().is_empty())
                .collect()
        }
        (None, None) => return Err(Error::InvalidInput("give a query or --query-file".into())),
    };
    let (store, embedder) = open_index(&a.index, &settings)?;
    let retriever = Retriever::new(&store, embedder.as_ref())?;
    let config = a.retrieval.config(a.k, &settings)?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for q in &queries {
        let result = retriever.retrieve(q, &config)?;
        serde_json::to_writer(&mut out, &result).map_err(io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Re-derive the indexed chunks and merge groups from the dataset using the
/// manifest's parameters.
fn indexed_chunks(
    kind: DatasetKind,
    data: &Path,
    queries: Option<&Path>,
    manifest: &IndexManifest,
) -> Result<(Vec<Chunk>, Vec<ChunkGroup>)> {
    let docs = datasets::load_documents(kind, data, queries)?;
    let chunks = split_corpus(&docs, &manifest.chunking)?.chunks;
    let groups = match &manifest.merge {
        Some(m) => merge_similar_chunks(&chunks, m.threshold, m.scope)?,
        None => singleton_groups(&chunks),
    };
    if groups.len() != manifest.chunk_count {
        return Err(Error::ManifestMismatch(format!(
            "dataset yields {} contexts but the index was built from {}",
            groups.len(),
            manifest.chunk_count
        )));
    }
    Ok((chunks, groups))
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let settings = a.backends.settings()?;
    let kind: DatasetKind = a.dataset.into();
    let (store, embedder) = open_index(&a.index, &settings)?;
    let retriever = Retriever::new(&store, embedder.as_ref())?;
    let config = a.retrieval.config(*a.k.iter().max().unwrap_or(&1), &settings)?;
    let (chunks, groups) = indexed_chunks(kind, &a.data, a.queries.as_deref(), store.manifest())?;
    let catalog = ChunkCatalog::new(&chunks, &groups);

    let report = if kind.is_multihop() {
        let (corpus, qpath) = datasets::multihop_paths(&a.data, a.queries.as_deref());
        let mut ds = datasets::load_multihop(&corpus, &qpath)?;
        if let Some(n) = a.limit {
            ds.queries.truncate(n);
        }
        eval::evaluate_multihop(&ds.queries, &catalog, &retriever, &config, &a.k, settings.workers, &ds.excluded)?
    } else {
        let mut ds = match kind {
            DatasetKind::Squad => datasets::load_squad(&a.data)?,
            _ => datasets::load_nq(&a.data)?,
        };
        if let Some(n) = a.limit {
            ds.queries.truncate(n);
        }
        eval::evaluate_single_hop(kind, &ds.queries, &catalog, &retriever, &config, &a.k, settings.workers)?
    };
    if let Err(msg) = report.check_invariants() {
        log::error!("metric invariant violated: {msg}");
    }

    emit(&eval::render_table(std::slice::from_ref(&report)))?;
    if !report.excluded.is_empty() {
        eprintln!("excluded {} queries with unresolvable ground truth", report.excluded.len());
    }
    if let Some(path) = &a.report {
        write_json(path, &report)?;
    }
    if let Some(path) = &a.csv {
        fs::write(path, eval::render_csv(std::slice::from_ref(&report)))?;
    }
    Ok(())
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<()> {
    let store = VectorStore::load(&a.index)?;
    let (_, groups) = indexed_chunks(a.dataset.into(), &a.data, a.queries.as_deref(), store.manifest())?;
    let reports: Vec<EvalReport> = a
        .reports
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::load(p, e.to_string()))?;
            serde_json::from_str(&text).map_err(|e| Error::load(p, e.to_string()))
        })
        .collect::<Result<_>>()?;
    let analysis = eval::analyze_contexts_per_title(&groups, &reports, &a.buckets)?;
    let d = &analysis.distribution;
    emit(&format!(
        "titles {}  contexts/title mean {:.2} median {} min {} max {}\n{}",
        d.titles,
        d.mean,
        d.median,
        d.min,
        d.max,
        analysis.buckets_csv()
    ))?;
    if let Some(path) = &a.csv {
        fs::write(path, analysis.buckets_csv())?;
    }
    if let Some(path) = &a.histogram_csv {
        fs::write(path, analysis.histogram_csv())?;
    }
    Ok(())
}

fn cmd_inspect(index: &Path) -> Result<()> {
    let store = VectorStore::load(index)?;
    let counts = json!({
        "question_chunk": store.count_kind(DocKind::QuestionChunk),
        "bare_chunk": store.count_kind(DocKind::BareChunk),
        "question_only": store.count_kind(DocKind::QuestionOnly),
    });
    let out = json!({ "manifest": store.manifest(), "documents": store.len(), "by_kind": counts });
    emit(&format!("{}\n", serde_json::to_string_pretty(&out).expect("serializable")))
}

fn emit(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}
