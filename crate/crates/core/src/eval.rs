//! Retrieval evaluation: C@k / T@k for single-hop datasets, Full@k / Part@k
//! for multi-hop, per-query latency, and the contexts-per-title analysis.
//!
//! Metric values are accumulated as exact rationals and converted to `f64`
//! only for display.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_whitespace, Chunk, ChunkGroup};
use crate::datasets::{DatasetKind, Evidence, MultiHopQuery, SingleHopQuery};
use crate::error::{Error, Result};
use crate::retrieval::{RetrievalConfig, RetrievalMode, RetrievalResult, Retriever};

/// An exact fraction with its float value for display.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: f64,
    pub numerator: u64,
    pub denominator: u64,
}

impl Metric {
    pub fn from_ratio(r: Ratio<u64>) -> Self {
        Self {
            value: *r.numer() as f64 / *r.denom() as f64,
            numerator: *r.numer(),
            denominator: *r.denom(),
        }
    }

    pub fn ratio(&self) -> Ratio<u64> {
        Ratio::new(self.numerator, self.denominator)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMetrics {
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_accuracy: Option<Metric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title_accuracy: Option<Metric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_match: Option<Metric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial_match: Option<Metric>,
}

impl KMetrics {
    fn columns(&self) -> Vec<(String, Metric)> {
        let k = self.k;
        [
            ("C", self.context_accuracy),
            ("T", self.title_accuracy),
            ("Full", self.full_match),
            ("Part", self.partial_match),
        ]
        .into_iter()
        .filter_map(|(name, m)| m.map(|m| (format!("{name}@{k}"), m)))
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub query_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_title: Option<String>,
    /// Context hit (single-hop) or full match (multi-hop), one per k.
    pub hits: Vec<bool>,
    pub retrieved: Vec<String>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: DatasetKind,
    pub mode: RetrievalMode,
    pub k_values: Vec<usize>,
    pub multiplier: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyde_target: Option<String>,
    pub metrics: Vec<KMetrics>,
    pub query_count: usize,
    pub excluded: Vec<String>,
    pub total_seconds: f64,
    pub ms_per_query: f64,
    #[serde(default)]
    pub index_seconds: Option<f64>,
    pub per_query: Vec<QueryOutcome>,
}

impl EvalReport {
    /// The report as JSON with every timing field removed.
    pub fn metrics_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(obj) = v.as_object_mut() {
            for key in ["total_seconds", "ms_per_query", "index_seconds"] {
                obj.remove(key);
            }
            if let Some(rows) = obj.get_mut("per_query").and_then(|p| p.as_array_mut()) {
                for row in rows {
                    if let Some(r) = row.as_object_mut() {
                        r.remove("elapsed_ms");
                    }
                }
            }
        }
        v
    }

    pub fn metric(&self, column: &str) -> Option<Metric> {
        self.metrics
            .iter()
            .flat_map(KMetrics::columns)
            .find(|(name, _)| name == column)
            .map(|(_, m)| m)
    }

    pub fn columns(&self) -> Vec<(String, Metric)> {
        self.metrics.iter().flat_map(KMetrics::columns).collect()
    }

    /// Check monotonicity in k, T@k >= C@k, Part@k >= Full@k and range.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let ratio = |m: Option<Metric>| m.map(|m| m.ratio());
        let mut prev: Option<&KMetrics> = None;
        for row in &self.metrics {
            for (name, m) in row.columns() {
                if m.ratio() > Ratio::from_integer(1) {
                    return Err(format!("{name} = {} exceeds 1", m.value));
                }
            }
            if let (Some(t), Some(c)) = (ratio(row.title_accuracy), ratio(row.context_accuracy)) {
                if t < c {
                    return Err(format!("T@{k} < C@{k}", k = row.k));
                }
            }
            if let (Some(p), Some(f)) = (ratio(row.partial_match), ratio(row.full_match)) {
                if p < f {
                    return Err(format!("Part@{k} < Full@{k}", k = row.k));
                }
            }
            if let Some(p) = prev {
                let pairs = [
                    (p.context_accuracy, row.context_accuracy, "C"),
                    (p.title_accuracy, row.title_accuracy, "T"),
                    (p.full_match, row.full_match, "Full"),
                    (p.partial_match, row.partial_match, "Part"),
                ];
                for (a, b, name) in pairs {
                    if let (Some(a), Some(b)) = (ratio(a), ratio(b)) {
                        if b < a {
                            return Err(format!("{name}@{} < {name}@{}", row.k, p.k));
                        }
                    }
                }
            }
            prev = Some(row);
        }
        Ok(())
    }
}

fn fraction(hits: u64, total: u64) -> Ratio<u64> {
    if total == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(hits, total)
    }
}

pub fn validate_k_values(k_values: &[usize]) -> Result<()> {
    if k_values.is_empty() {
        return Err(Error::InvalidInput("no k values".into()));
    }
    if k_values[0] == 0 || k_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(format!(
            "k values must be positive and strictly ascending: {k_values:?}"
        )));
    }
    Ok(())
}

/// A single-hop query with resolved ground truth and its ranked contexts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingleHopCase {
    pub query_id: String,
    pub gt_title: String,
    /// Group keys counted as the correct context.
    pub gt_keys: BTreeSet<String>,
    /// `(group key, title)` of each distinct retrieved context, best first.
    pub retrieved: Vec<(String, String)>,
}

/// A multi-hop query reduced to, per evidence item, the 0-based rank of the
/// first retrieved context that matches it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiHopCase {
    pub query_id: String,
    pub first_match_rank: Vec<Option<usize>>,
    #[serde(default)]
    pub retrieved: Vec<String>,
}

pub fn score_single_hop(
    cases: &[SingleHopCase],
    k_values: &[usize],
) -> Result<(Vec<KMetrics>, Vec<QueryOutcome>)> {
    validate_k_values(k_values)?;
    let n = cases.len() as u64;
    let mut context_hits = vec![0u64; k_values.len()];
    let mut title_hits = vec![0u64; k_values.len()];
    let mut outcomes = Vec::with_capacity(cases.len());
    for case in cases {
        let first_context = case.retrieved.iter().position(|(key, _)| case.gt_keys.contains(key));
        let first_title = case.retrieved.iter().position(|(_, t)| *t == case.gt_title);
        let mut hits = Vec::with_capacity(k_values.len());
        for (i, &k) in k_values.iter().enumerate() {
            let c = first_context.is_some_and(|r| r < k);
            context_hits[i] += u64::from(c);
            title_hits[i] += u64::from(first_title.is_some_and(|r| r < k));
            hits.push(c);
        }
        outcomes.push(QueryOutcome {
            query_id: case.query_id.clone(),
            gt_title: Some(case.gt_title.clone()),
            hits,
            retrieved: case.retrieved.iter().map(|(k, _)| k.clone()).collect(),
            elapsed_ms: 0.0,
        });
    }
    let metrics = k_values
        .iter()
        .enumerate()
        .map(|(i, &k)| KMetrics {
            k,
            context_accuracy: Some(Metric::from_ratio(fraction(context_hits[i], n))),
            title_accuracy: Some(Metric::from_ratio(fraction(title_hits[i], n))),
            full_match: None,
            partial_match: None,
        })
        .collect();
    Ok((metrics, outcomes))
}

pub fn score_multihop(
    cases: &[MultiHopCase],
    k_values: &[usize],
) -> Result<(Vec<KMetrics>, Vec<QueryOutcome>)> {
    validate_k_values(k_values)?;
    let n = cases.len() as u64;
    let mut full = vec![0u64; k_values.len()];
    let mut partial = vec![Ratio::<u64>::from_integer(0); k_values.len()];
    let mut outcomes = Vec::with_capacity(cases.len());
    for case in cases {
        let total = case.first_match_rank.len() as u64;
        let mut hits = Vec::with_capacity(k_values.len());
        for (i, &k) in k_values.iter().enumerate() {
            let found = case
                .first_match_rank
                .iter()
                .filter(|r| r.is_some_and(|r| r < k))
                .count() as u64;
            let all = total > 0 && found == total;
            full[i] += u64::from(all);
            partial[i] += fraction(found, total);
            hits.push(all);
        }
        outcomes.push(QueryOutcome {
            query_id: case.query_id.clone(),
            gt_title: None,
            hits,
            retrieved: case.retrieved.clone(),
            elapsed_ms: 0.0,
        });
    }
    let metrics = k_values
        .iter()
        .enumerate()
        .map(|(i, &k)| KMetrics {
            k,
            context_accuracy: None,
            title_accuracy: None,
            full_match: Some(Metric::from_ratio(fraction(full[i], n))),
            partial_match: Some(Metric::from_ratio(if n == 0 {
                Ratio::from_integer(0)
            } else {
                partial[i] / Ratio::from_integer(n)
            })),
        })
        .collect();
    Ok((metrics, outcomes))
}

fn match_key(text: &str) -> String {
    normalize_whitespace(&text.to_lowercase())
}

/// How one evidence item is recognized in a retrieved chunk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvidenceMatcher {
    /// Normalized fact text contained in the chunk's normalized text.
    Fact(String),
    /// Chunk comes from this document.
    Doc(String),
}

/// Chunk metadata needed to resolve ground truth and score retrieved
/// contexts, including near-duplicate groups.
#[derive(Debug, Clone)]
pub struct ChunkCatalog {
    group_of: HashMap<String, String>,
    doc_of: HashMap<String, String>,
    match_text: HashMap<String, String>,
    by_text: HashMap<String, Vec<String>>,
    by_doc: HashMap<String, Vec<String>>,
    titles: HashMap<String, String>,
    members: HashMap<String, Vec<String>>,
    order: Vec<String>,
}

impl ChunkCatalog {
    /// `groups` may be empty, in which case every chunk is its own group.
    pub fn new(chunks: &[Chunk], groups: &[ChunkGroup]) -> Self {
        let mut group_of = crate::corpus::group_lookup(groups);
        let mut cat = ChunkCatalog {
            group_of: HashMap::new(),
            doc_of: HashMap::new(),
            match_text: HashMap::new(),
            by_text: HashMap::new(),
            by_doc: HashMap::new(),
            titles: HashMap::new(),
            members: HashMap::new(),
            order: Vec::new(),
        };
        for c in chunks {
            let group = group_of.remove(&c.chunk_id).unwrap_or_else(|| c.chunk_id.clone());
            cat.members.entry(group.clone()).or_default().push(c.chunk_id.clone());
            cat.group_of.insert(c.chunk_id.clone(), group);
            cat.doc_of.insert(c.chunk_id.clone(), c.doc_id.clone());
            let key = match_key(&c.text);
            cat.by_text
                .entry(normalize_whitespace(&c.text))
                .or_default()
                .push(c.chunk_id.clone());
            cat.match_text.insert(c.chunk_id.clone(), key);
            cat.by_doc.entry(c.doc_id.clone()).or_default().push(c.chunk_id.clone());
            cat.titles.insert(c.chunk_id.clone(), c.title.clone());
            cat.order.push(c.chunk_id.clone());
        }
        cat
    }

    /// Group key for a retrieved chunk id.
    pub fn group_key(&self, chunk_id: &str) -> String {
        self.group_of
            .get(chunk_id)
            .cloned()
            .unwrap_or_else(|| chunk_id.to_string())
    }

    /// Group ids whose members have the query's context text,
    /// preferring chunks under the query's own title.
    pub fn resolve_single_hop(&self, query: &SingleHopQuery) -> Option<BTreeSet<String>> {
        let ids = self.by_text.get(&normalize_whitespace(&query.gt_context))?;
        let same_title: Vec<&String> = ids
            .iter()
            .filter(|id| self.titles.get(*id) == Some(&query.gt_title))
            .collect();
        let chosen: Vec<&String> = if same_title.is_empty() {
            ids.iter().collect()
        } else {
            same_title
        };
        Some(chosen.into_iter().map(|id| self.group_key(id)).collect())
    }

    /// Fact containment when the item has fact text, otherwise its source
    /// document. `None` when no indexed chunk satisfies the matcher.
    pub fn resolve_evidence(&self, evidence: &Evidence) -> Option<EvidenceMatcher> {
        let key = evidence.fact.as_deref().map(match_key).unwrap_or_default();
        if key.is_empty() {
            return self
                .by_doc
                .contains_key(&evidence.doc_id)
                .then(|| EvidenceMatcher::Doc(evidence.doc_id.clone()));
        }
        let in_doc = self
            .by_doc
            .get(&evidence.doc_id)
            .into_iter()
            .flatten()
            .any(|id| self.match_text[id].contains(&key));
        (in_doc || self.order.iter().any(|id| self.match_text[id].contains(&key)))
            .then_some(EvidenceMatcher::Fact(key))
    }

    /// Whether a retrieved chunk (by id, with its returned text) satisfies
    /// the matcher. Text of group members is checked too.
    pub fn matches(&self, matcher: &EvidenceMatcher, chunk_id: &str, chunk_text: &str) -> bool {
        match matcher {
            EvidenceMatcher::Fact(key) => {
                match_key(chunk_text).contains(key.as_str())
                    || self.members_of(chunk_id).any(|m| self.match_text[m].contains(key.as_str()))
            }
            EvidenceMatcher::Doc(doc) => {
                self.doc_of.get(chunk_id) == Some(doc)
                    || self.members_of(chunk_id).any(|m| self.doc_of.get(m) == Some(doc))
            }
        }
    }

    fn members_of<'a>(&'a self, chunk_id: &'a str) -> impl Iterator<Item = &'a String> + 'a {
        let group = self.group_of.get(chunk_id).map(String::as_str).unwrap_or(chunk_id);
        self.members.get(group).into_iter().flatten()
    }
}

fn run_queries(
    retriever: &Retriever<'_>,
    questions: &[&str],
    config: &RetrievalConfig,
    workers: usize,
) -> Result<Vec<RetrievalResult>> {
    if workers <= 1 {
        return questions.iter().map(|q| retriever.retrieve(q, config)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    pool.install(|| {
        questions
            .par_iter()
            .map(|q| retriever.retrieve(q, config))
            .collect()
    })
}

#[allow(clippy::too_many_arguments)]
fn finish_report(
    dataset: DatasetKind,
    retriever: &Retriever<'_>,
    config: &RetrievalConfig,
    k_values: &[usize],
    metrics: Vec<KMetrics>,
    mut per_query: Vec<QueryOutcome>,
    results: &[RetrievalResult],
    excluded: Vec<String>,
) -> EvalReport {
    for (o, r) in per_query.iter_mut().zip(results) {
        o.elapsed_ms = r.elapsed_ms;
    }
    let total_ms: f64 = results.iter().map(|r| r.elapsed_ms).sum();
    let hyde_target = (config.mode == RetrievalMode::Hyde).then(|| {
        if retriever.hyde_uses_chunks(config.hyde_target) {
            "chunks".to_string()
        } else {
            "questions".to_string()
        }
    });
    EvalReport {
        dataset,
        mode: config.mode,
        k_values: k_values.to_vec(),
        multiplier: config.multiplier,
        hyde_target,
        metrics,
        query_count: results.len(),
        excluded,
        total_seconds: total_ms / 1e3,
        ms_per_query: if results.is_empty() { 0.0 } else { total_ms / results.len() as f64 },
        index_seconds: retriever.store().manifest().build.as_ref().map(|b| b.index_seconds),
        per_query,
    }
}

/// Retrieve once per query at the largest k and score every k from that
/// ranking. Queries whose ground truth is absent from the catalog are
/// listed in `excluded`.
pub fn evaluate_single_hop(
    dataset: DatasetKind,
    queries: &[SingleHopQuery],
    catalog: &ChunkCatalog,
    retriever: &Retriever<'_>,
    config: &RetrievalConfig,
    k_values: &[usize],
    workers: usize,
) -> Result<EvalReport> {
    validate_k_values(k_values)?;
    let mut config = config.clone();
    config.k = *k_values.last().expect("validated");

    let mut excluded = Vec::new();
    let mut resolved = Vec::new();
    for q in queries {
        match catalog.resolve_single_hop(q) {
            Some(keys) => resolved.push((q, keys)),
            None => excluded.push(q.query_id.clone()),
        }
    }
    let questions: Vec<&str> = resolved.iter().map(|(q, _)| q.question.as_str()).collect();
    let results = run_queries(retriever, &questions, &config, workers)?;

    let cases: Vec<SingleHopCase> = resolved
        .into_iter()
        .zip(&results)
        .map(|((q, gt_keys), r)| SingleHopCase {
            query_id: q.query_id.clone(),
            gt_title: q.gt_title.clone(),
            gt_keys,
            retrieved: r
                .contexts
                .iter()
                .map(|c| (catalog.group_key(&c.chunk_id), c.title.clone()))
                .collect(),
        })
        .collect();
    let (metrics, per_query) = score_single_hop(&cases, k_values)?;
    Ok(finish_report(
        dataset, retriever, &config, k_values, metrics, per_query, &results, excluded,
    ))
}

pub fn evaluate_multihop(
    queries: &[MultiHopQuery],
    catalog: &ChunkCatalog,
    retriever: &Retriever<'_>,
    config: &RetrievalConfig,
    k_values: &[usize],
    workers: usize,
    preexcluded: &[String],
) -> Result<EvalReport> {
    validate_k_values(k_values)?;
    let mut config = config.clone();
    config.k = *k_values.last().expect("validated");

    let mut excluded: Vec<String> = preexcluded.to_vec();
    let mut resolved = Vec::new();
    for q in queries {
        let matchers: Option<Vec<EvidenceMatcher>> =
            q.evidence.iter().map(|e| catalog.resolve_evidence(e)).collect();
        match matchers {
            Some(m) if !m.is_empty() => resolved.push((q, m)),
            _ => excluded.push(q.query_id.clone()),
        }
    }
    let questions: Vec<&str> = resolved.iter().map(|(q, _)| q.question.as_str()).collect();
    let results = run_queries(retriever, &questions, &config, workers)?;

    let cases: Vec<MultiHopCase> = resolved
        .into_iter()
        .zip(&results)
        .map(|((q, matchers), r)| MultiHopCase {
            query_id: q.query_id.clone(),
            first_match_rank: matchers
                .iter()
                .map(|m| {
                    r.contexts
                        .iter()
                        .position(|c| catalog.matches(m, &c.chunk_id, &c.chunk_text))
                })
                .collect(),
            retrieved: r.contexts.iter().map(|c| catalog.group_key(&c.chunk_id)).collect(),
        })
        .collect();
    let (metrics, per_query) = score_multihop(&cases, k_values)?;
    Ok(finish_report(
        DatasetKind::Multihop,
        retriever,
        &config,
        k_values,
        metrics,
        per_query,
        &results,
        excluded,
    ))
}

fn pct(m: Metric) -> String {
    format!("{:.2}", m.value * 100.0)
}

/// Fixed-width table, one row per report.
pub fn render_table(reports: &[EvalReport]) -> String {
    let Some(first) = reports.first() else {
        return String::new();
    };
    let names: Vec<String> = first.columns().into_iter().map(|(n, _)| n).collect();
    let mut out = String::new();
    let _ = write!(out, "{:<8}", "Mode");
    for n in &names {
        let _ = write!(out, " {n:>9}");
    }
    let _ = writeln!(out, " {:>10} {:>9} {:>9}", "Time(s)", "ms/q", "Index(s)");
    for r in reports {
        let _ = write!(out, "{:<8}", r.mode.to_string());
        for n in &names {
            let v = r.metric(n).map(pct).unwrap_or_else(|| "-".into());
            let _ = write!(out, " {v:>9}");
        }
        let index = r.index_seconds.map_or("-".into(), |s| format!("{s:.2}"));
        let _ = writeln!(
            out,
            " {:>10.3} {:>9.3} {index:>9}",
            r.total_seconds, r.ms_per_query
        );
    }
    out
}

/// CSV with the same columns as [`render_table`]; metrics as fractions.
pub fn render_csv(reports: &[EvalReport]) -> String {
    let Some(first) = reports.first() else {
        return String::new();
    };
    let names: Vec<String> = first.columns().into_iter().map(|(n, _)| n).collect();
    let mut out = String::from("mode");
    for n in &names {
        out.push(',');
        out.push_str(n);
    }
    out.push_str(",Time(s),ms/q,Index(s),queries,excluded\n");
    for r in reports {
        out.push_str(&r.mode.to_string());
        for n in &names {
            out.push(',');
            if let Some(m) = r.metric(n) {
                let _ = write!(out, "{}", m.value);
            }
        }
        let _ = writeln!(
            out,
            ",{},{},{},{},{}",
            r.total_seconds,
            r.ms_per_query,
            r.index_seconds.map_or(String::new(), |s| s.to_string()),
            r.query_count,
            r.excluded.len()
        );
    }
    out
}

pub const DEFAULT_BUCKET_EDGES: [usize; 6] = [1, 2, 6, 21, 51, 101];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextDistribution {
    pub titles: usize,
    pub mean: f64,
    pub median: f64,
    pub min: usize,
    pub max: usize,
    /// `(contexts per title, number of titles)`, ascending.
    pub histogram: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub label: String,
    pub lower: usize,
    pub upper: Option<usize>,
    pub titles: usize,
    pub queries: usize,
    /// Top-1 context accuracy per mode.
    pub accuracy: BTreeMap<String, f64>,
    /// Relative Top-1 gain of quote over naive, in percent.
    pub quote_vs_naive_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextAnalysis {
    pub distribution: ContextDistribution,
    pub buckets: Vec<BucketRow>,
}

/// Summary of how many contexts each title has.
pub fn context_distribution<'a>(titles: impl IntoIterator<Item = &'a str>) -> ContextDistribution {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in titles {
        *counts.entry(t).or_default() += 1;
    }
    let mut values: Vec<usize> = counts.values().copied().collect();
    values.sort_unstable();
    let n = values.len();
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for &v in &values {
        *histogram.entry(v).or_default() += 1;
    }
    let median = match n {
        0 => 0.0,
        _ if n % 2 == 1 => values[n / 2] as f64,
        _ => (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0,
    };
    ContextDistribution {
        titles: n,
        mean: if n == 0 { 0.0 } else { values.iter().sum::<usize>() as f64 / n as f64 },
        median,
        min: values.first().copied().unwrap_or(0),
        max: values.last().copied().unwrap_or(0),
        histogram: histogram.into_iter().collect(),
    }
}

fn bucket_label(lower: usize, upper: Option<usize>) -> String {
    match upper {
        Some(u) if u == lower => lower.to_string(),
        Some(u) => format!("{lower}-{u}"),
        None => format!("{lower}+"),
    }
}

/// Contexts-per-title histogram plus Top-1 accuracy bucketed by the
/// ground-truth title's context count, for each report's mode.
/// `edges` are ascending bucket lower bounds.
pub fn analyze_contexts_per_title(
    groups: &[ChunkGroup],
    reports: &[EvalReport],
    edges: &[usize],
) -> Result<ContextAnalysis> {
    if edges.is_empty() || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(format!("bucket edges must ascend: {edges:?}")));
    }
    let distribution = context_distribution(groups.iter().map(|g| g.representative.title.as_str()));
    let mut per_title: HashMap<&str, usize> = HashMap::new();
    for g in groups {
        *per_title.entry(g.representative.title.as_str()).or_default() += 1;
    }

    let bucket_of = |count: usize| edges.iter().rposition(|&e| count >= e);
    let mut rows: Vec<BucketRow> = edges
        .iter()
        .enumerate()
        .map(|(i, &lower)| {
            let upper = edges.get(i + 1).map(|u| u - 1);
            BucketRow {
                label: bucket_label(lower, upper),
                lower,
                upper,
                titles: 0,
                queries: 0,
                accuracy: BTreeMap::new(),
                quote_vs_naive_pct: None,
            }
        })
        .collect();
    for &count in per_title.values() {
        if let Some(b) = bucket_of(count) {
            rows[b].titles += 1;
        }
    }

    let mut query_counted = false;
    for report in reports {
        let k1 = report.k_values.iter().position(|&k| k == 1).ok_or_else(|| {
            Error::InvalidInput(format!("{} report has no k=1 column", report.mode))
        })?;
        let mut hits = vec![(0u64, 0u64); rows.len()];
        for q in &report.per_query {
            let Some(title) = q.gt_title.as_deref() else {
                continue;
            };
            let Some(b) = per_title.get(title).and_then(|&c| bucket_of(c)) else {
                continue;
            };
            hits[b].0 += u64::from(q.hits[k1]);
            hits[b].1 += 1;
        }
        for (row, (h, n)) in rows.iter_mut().zip(hits) {
            if !query_counted {
                row.queries = n as usize;
            }
            if n > 0 {
                row.accuracy.insert(report.mode.to_string(), h as f64 / n as f64);
            }
        }
        query_counted = true;
    }
    for row in &mut rows {
        if let (Some(q), Some(n)) = (row.accuracy.get("quote"), row.accuracy.get("naive")) {
            if *n > 0.0 {
                row.quote_vs_naive_pct = Some((q - n) / n * 100.0);
            }
        }
    }
    Ok(ContextAnalysis {
        distribution,
        buckets: rows,
    })
}

impl ContextAnalysis {
    pub fn buckets_csv(&self) -> String {
        let modes: BTreeSet<&String> = self.buckets.iter().flat_map(|b| b.accuracy.keys()).collect();
        let mut out = String::from("bucket,lower,upper,titles,queries");
        for m in &modes {
            let _ = write!(out, ",top1_{m}");
        }
        out.push_str(",quote_vs_naive_pct\n");
        for b in &self.buckets {
            let _ = write!(
                out,
                "{},{},{},{},{}",
                b.label,
                b.lower,
                b.upper.map_or(String::new(), |u| u.to_string()),
                b.titles,
                b.queries
            );
            for m in &modes {
                out.push(',');
                if let Some(a) = b.accuracy.get(*m) {
                    let _ = write!(out, "{a}");
                }
            }
            out.push(',');
            if let Some(p) = b.quote_vs_naive_pct {
                let _ = write!(out, "{p}");
            }
            out.push('\n');
        }
        out
    }

    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("contexts,titles\n");
        for (c, t) in &self.distribution.histogram {
            let _ = writeln!(out, "{c},{t}");
        }
        out
    }
}
