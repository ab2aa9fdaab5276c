//! Query strategies over a [`VectorStore`].
//!
//! * `naive`: embed the query and return the top-k bare chunks.
//! * `quote`: fetch top k*M documents, keep each chunk's best hit, cut to k.
//! * `hyde`: have a generator write a hypothetical passage, embed that, and
//!   search as naive (bare chunks present) or as quote (question-only store).

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::embedding::{embed_batch, EmbedOptions, EmbedderBackend};
use crate::error::{Error, Result};
use crate::question_gen::{GeneratorBackend, RetryPolicy};
use crate::store::{DocKind, ScoredHit, VectorStore};

pub const DEFAULT_MULTIPLIER: usize = 5;
pub const DEFAULT_HYDE_PROMPT: &str =
    "Write a short encyclopedia-style passage that answers the question: {query}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalMode {
    Naive,
    Quote,
    Hyde,
}

impl fmt::Display for RetrievalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RetrievalMode::Naive => "naive",
            RetrievalMode::Quote => "quote",
            RetrievalMode::Hyde => "hyde",
        })
    }
}

impl std::str::FromStr for RetrievalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(RetrievalMode::Naive),
            "quote" => Ok(RetrievalMode::Quote),
            "hyde" => Ok(RetrievalMode::Hyde),
            _ => Err(Error::InvalidInput(format!("unknown retrieval mode {s:?}"))),
        }
    }
}

/// Which documents a HyDE passage is matched against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HydeTarget {
    /// Bare chunks when the store has them, otherwise question documents.
    #[default]
    Auto,
    Chunks,
    Questions,
}

#[derive(Clone)]
pub struct RetrievalConfig {
    pub mode: RetrievalMode,
    pub k: usize,
    pub multiplier: usize,
    /// Re-query once with `2 * multiplier` when dedup leaves fewer than k.
    pub underfill_retry: bool,
    pub hyde_backend: Option<Arc<dyn GeneratorBackend>>,
    pub hyde_prompt: String,
    pub hyde_target: HydeTarget,
}

impl fmt::Debug for RetrievalConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RetrievalConfig")
            .field("mode", &self.mode)
            .field("k", &self.k)
            .field("multiplier", &self.multiplier)
            .field("underfill_retry", &self.underfill_retry)
            .field("hyde_backend", &self.hyde_backend.as_ref().map(|b| b.identity().to_string()))
            .field("hyde_target", &self.hyde_target)
            .finish()
    }
}

impl RetrievalConfig {
    pub fn new(mode: RetrievalMode, k: usize) -> Self {
        Self {
            mode,
            k,
            multiplier: DEFAULT_MULTIPLIER,
            underfill_retry: false,
            hyde_backend: None,
            hyde_prompt: DEFAULT_HYDE_PROMPT.into(),
            hyde_target: HydeTarget::Auto,
        }
    }

    pub fn naive(k: usize) -> Self {
        Self::new(RetrievalMode::Naive, k)
    }

    pub fn quote(k: usize, multiplier: usize) -> Self {
        Self {
            multiplier,
            ..Self::new(RetrievalMode::Quote, k)
        }
    }

    pub fn hyde(k: usize, backend: Arc<dyn GeneratorBackend>) -> Self {
        Self {
            hyde_backend: Some(backend),
            ..Self::new(RetrievalMode::Hyde, k)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        if self.multiplier == 0 {
            return Err(Error::InvalidInput("multiplier M must be at least 1".into()));
        }
        if self.mode == RetrievalMode::Hyde && self.hyde_backend.is_none() {
            return Err(Error::InvalidInput("hyde mode requires a generator backend".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedContext {
    pub chunk_id: String,
    pub title: String,
    pub chunk_text: String,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_question: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query: String,
    pub contexts: Vec<RetrievedContext>,
    pub elapsed_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothetical_document: Option<String>,
}

/// Keep the first (best) hit per chunk, preserving order.
pub fn deduplicate(hits: Vec<ScoredHit>) -> Vec<ScoredHit> {
    let mut seen = HashSet::new();
    hits.into_iter()
        .filter(|h| seen.insert(h.chunk_id.clone()))
        .collect()
}

/// Couples a store with the embedder that built it.
pub struct Retriever<'a> {
    store: &'a VectorStore,
    embedder: &'a dyn EmbedderBackend,
}

impl<'a> Retriever<'a> {
    pub fn new(store: &'a VectorStore, embedder: &'a dyn EmbedderBackend) -> Result<Self> {
        if store.is_empty() {
            return Err(Error::EmptyIndex);
        }
        store.check_embedder(embedder.identity())?;
        Ok(Self { store, embedder })
    }

    pub fn store(&self) -> &VectorStore {
        self.store
    }

    /// The search target HyDE resolves to on this store.
    pub fn hyde_uses_chunks(&self, target: HydeTarget) -> bool {
        match target {
            HydeTarget::Auto => self.store.has_kind(DocKind::BareChunk),
            HydeTarget::Chunks => true,
            HydeTarget::Questions => false,
        }
    }

    pub fn retrieve(&self, query: &str, config: &RetrievalConfig) -> Result<RetrievalResult> {
        config.validate()?;
        let started = Instant::now();
        let mut hypothetical_document = None;

        let hits = match config.mode {
            RetrievalMode::Naive => self.naive(query, config.k)?,
            RetrievalMode::Quote => self.quote(query, config)?,
            RetrievalMode::Hyde => {
                let backend = config.hyde_backend.as_ref().expect("validated");
                let prompt = config.hyde_prompt.replace("{query}", query);
                let passage = backend
                    .generate(&prompt)
                    .map_err(|e| Error::Hyde(e.to_string()))?;
                if passage.trim().is_empty() {
                    return Err(Error::Hyde("generator returned an empty passage".into()));
                }
                let hits = if self.hyde_uses_chunks(config.hyde_target) {
                    self.naive(&passage, config.k)?
                } else {
                    self.quote(&passage, config)?
                };
                hypothetical_document = Some(passage);
                hits
            }
        };

        let contexts = hits
            .into_iter()
            .map(|h| RetrievedContext {
                chunk_id: h.chunk_id,
                title: h.title,
                chunk_text: h.chunk_text,
                score: h.score,
                matched_question: if h.kind.is_question() { h.question } else { None },
            })
            .collect();
        Ok(RetrievalResult {
            query: query.to_string(),
            contexts,
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
            hypothetical_document,
        })
    }

    fn embed(&self, text: &str) -> Result<crate::embedding::EmbeddingVector> {
        let opts = EmbedOptions {
            batch_size: 1,
            workers: 1,
            retry: RetryPolicy::default(),
        };
        Ok(embed_batch(self.embedder, &[text], &opts)?.remove(0))
    }

    fn naive(&self, text: &str, k: usize) -> Result<Vec<ScoredHit>> {
        if !self.store.has_kind(DocKind::BareChunk) {
            return Err(Error::InvalidInput(
                "naive retrieval needs an index with bare_chunk documents".into(),
            ));
        }
        let v = self.embed(text)?;
        self.store
            .query_top_n_where(&v, k, |d| d.kind == DocKind::BareChunk)
    }

    fn quote(&self, text: &str, config: &RetrievalConfig) -> Result<Vec<ScoredHit>> {
        let v = self.embed(text)?;
        let k = config.k;
        let fetch = k.saturating_mul(config.multiplier);
        let raw = self.store.query_top_n(&v, fetch)?;
        let fetched = raw.len();
        let mut unique = deduplicate(raw);
        if unique.len() < k && config.underfill_retry && fetched == fetch {
            unique = deduplicate(self.store.query_top_n(&v, fetch.saturating_mul(2))?);
        }
        unique.truncate(k);
        Ok(unique)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hit(chunk: &str, score: f64) -> ScoredHit {
        ScoredHit {
            doc_key: format!("{chunk}-{score}"),
            score,
            chunk_id: chunk.into(),
            title: String::new(),
            chunk_text: String::new(),
            kind: DocKind::QuestionChunk,
            question: None,
        }
    }

    #[test]
    fn dedup_examples() {
        assert!(deduplicate(vec![]).is_empty());
        let out = deduplicate(vec![hit("A", 0.9), hit("B", 0.8), hit("A", 0.7)]);
        let got: Vec<(&str, f64)> = out.iter().map(|h| (h.chunk_id.as_str(), h.score)).collect();
        assert_eq!(got, vec![("A", 0.9), ("B", 0.8)]);
    }

    #[test]
    fn config_validation() {
        assert!(RetrievalConfig::quote(0, 5).validate().is_err());
        assert!(RetrievalConfig::quote(1, 0).validate().is_err());
        assert!(RetrievalConfig::new(RetrievalMode::Hyde, 1).validate().is_err());
        assert!(RetrievalConfig::naive(3).validate().is_ok());
    }

    #[test]
    fn mode_round_trip() {
        for m in [RetrievalMode::Naive, RetrievalMode::Quote, RetrievalMode::Hyde] {
            assert_eq!(m.to_string().parse::<RetrievalMode>().unwrap(), m);
        }
    }
}
