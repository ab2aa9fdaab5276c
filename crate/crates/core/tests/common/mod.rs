//! Helpers shared by the integration tests: fixture access, random stores
//! and brute-force oracles written independently of the library internals.
#![allow(dead_code)]

use std::collections::HashSet;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quote_core::embedding::EmbeddingVector;
use quote_core::store::{DocKind, IndexManifest, IndexedDocument, ScoredHit, VectorStore};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn json_fixture(rel: &str) -> serde_json::Value {
    serde_json::from_str(&read_fixture(rel)).unwrap()
}

pub const RANDOM_EMBEDDER: &str = "random-test";

pub fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        if v.iter().any(|x| *x != 0.0) {
            return v;
        }
    }
}

/// A store of `n` documents spread over `chunks` chunk ids. Kinds rotate
/// between question and bare documents when `mixed` is set.
pub fn random_store(seed: u64, n: usize, dim: usize, chunks: usize, mixed: bool) -> VectorStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = VectorStore::new(IndexManifest::new(RANDOM_EMBEDDER, dim));
    let mut docs = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for i in 0..n {
        let chunk = rng.random_range(0..chunks.max(1));
        let kind = if mixed && i % 3 == 0 { DocKind::BareChunk } else { DocKind::QuestionOnly };
        docs.push(IndexedDocument {
            doc_key: format!("doc-{i:05}"),
            kind,
            embed_text: format!("text {i}"),
            question: kind.is_question().then(|| format!("question {i}?")),
            answer: None,
            chunk_id: format!("chunk-{chunk:04}"),
            title: format!("title-{}", chunk % 7),
            chunk_text: format!("chunk text {chunk}"),
        });
        vectors.push(EmbeddingVector::new(random_vector(&mut rng, dim), RANDOM_EMBEDDER).unwrap());
    }
    store.add_documents(docs, vectors).unwrap();
    store
}

pub fn query_vector(seed: u64, dim: usize) -> EmbeddingVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    EmbeddingVector::new(random_vector(&mut rng, dim), RANDOM_EMBEDDER).unwrap()
}

fn oracle_cosine(a: &[f32], b: &[f32]) -> f64 {
    let mut ab = 0.0f64;
    let mut aa = 0.0f64;
    let mut bb = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        ab += *x as f64 * *y as f64;
        aa += *x as f64 * *x as f64;
        bb += *y as f64 * *y as f64;
    }
    ab / (aa.sqrt() * bb.sqrt())
}

/// Score every document, sort everything, take the first `n`.
pub fn brute_force_top_n(
    store: &VectorStore,
    query: &[f32],
    n: usize,
    keep: impl Fn(&IndexedDocument) -> bool,
) -> Vec<(String, String, f64)> {
    let mut all: Vec<(String, String, f64)> = store
        .documents()
        .iter()
        .filter(|d| keep(d))
        .map(|d| {
            let v = store.vector(&d.doc_key).unwrap();
            (d.doc_key.clone(), d.chunk_id.clone(), oracle_cosine(query, v))
        })
        .collect();
    all.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(n);
    all
}

/// Walk the full ranking keeping the first hit per chunk, stop at `k`.
pub fn full_scan_dedup(store: &VectorStore, query: &[f32], k: usize) -> Vec<String> {
    let ranking = brute_force_top_n(store, query, usize::MAX, |_| true);
    let mut seen = HashSet::new();
    ranking
        .into_iter()
        .filter(|(_, chunk, _)| seen.insert(chunk.clone()))
        .take(k)
        .map(|(_, chunk, _)| chunk)
        .collect()
}

/// One-pass first-occurrence filter over chunk ids.
pub fn first_occurrence(hits: &[ScoredHit]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for h in hits {
        if !out.contains(&h.chunk_id) {
            out.push(h.chunk_id.clone());
        }
    }
    out
}

pub fn same_ranking(got: &[ScoredHit], want: &[(String, String, f64)]) -> bool {
    got.len() == want.len()
        && got
            .iter()
            .zip(want)
            .all(|(g, w)| g.doc_key == w.0 && (g.score - w.2).abs() < 1e-12)
}

use quote_core::builder::{build_index, BuildOptions, BuildOutput};
use quote_core::corpus::{split_corpus, Chunk, ChunkingPolicy, Document};
use quote_core::question_gen::{GeneratorBackend, PromptTemplate, QuestionBudget, TemplateName};
use quote_core::store::Composition;
use quote_core::EmbedderBackend;

pub fn composition(kinds: &str) -> Composition {
    kinds.parse().unwrap()
}

pub fn paragraph_chunks(docs: &[Document]) -> Vec<Chunk> {
    split_corpus(docs, &ChunkingPolicy::paragraph()).unwrap().chunks
}

/// Build with the basic template, a fixed budget and parallel workers.
pub fn build(
    chunks: &[Chunk],
    generator: &dyn GeneratorBackend,
    embedder: &dyn EmbedderBackend,
    kinds: &str,
    questions: usize,
) -> BuildOutput {
    let mut opts = BuildOptions::new(
        PromptTemplate::builtin(TemplateName::NqSquadBasic),
        QuestionBudget::fixed(questions).unwrap(),
    );
    opts.composition = composition(kinds);
    opts.workers = 4;
    build_index(chunks, generator, embedder, &opts).unwrap()
}
