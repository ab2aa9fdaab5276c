//! Exact in-memory vector store with a three-file on-disk layout:
//! `manifest.json`, `docs.jsonl` (one document per line) and `vectors.bin`
//! (little-endian f32 rows in `docs.jsonl` order).

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{ChunkingPolicy, MergeSettings};
use crate::embedding::{dot, norm, EmbeddingVector};
use crate::error::{Error, Result};
use crate::question_gen::QuestionBudget;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DOCS_FILE: &str = "docs.jsonl";
pub const VECTORS_FILE: &str = "vectors.bin";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocKind {
    /// Generated question followed by its chunk text.
    QuestionChunk,
    /// The chunk text alone.
    BareChunk,
    /// The generated question alone.
    QuestionOnly,
}

impl DocKind {
    pub fn is_question(self) -> bool {
        !matches!(self, DocKind::BareChunk)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexedDocument {
    pub doc_key: String,
    pub kind: DocKind,
    pub embed_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    pub chunk_id: String,
    pub title: String,
    pub chunk_text: String,
}

/// Which document kinds an index holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Composition {
    pub question_chunk: bool,
    pub bare_chunk: bool,
    pub question_only: bool,
}

impl Default for Composition {
    fn default() -> Self {
        Self {
            question_chunk: true,
            bare_chunk: false,
            question_only: false,
        }
    }
}

impl Composition {
    pub fn bare_only() -> Self {
        Self {
            question_chunk: false,
            bare_chunk: true,
            question_only: false,
        }
    }

    pub fn needs_questions(&self) -> bool {
        self.question_chunk || self.question_only
    }

    pub fn is_empty(&self) -> bool {
        !(self.question_chunk || self.bare_chunk || self.question_only)
    }

    pub fn includes(&self, kind: DocKind) -> bool {
        match kind {
            DocKind::QuestionChunk => self.question_chunk,
            DocKind::BareChunk => self.bare_chunk,
            DocKind::QuestionOnly => self.question_only,
        }
    }
}

impl std::str::FromStr for Composition {
    type Err = Error;

    /// Comma-separated kinds, e.g. `question_chunk,bare_chunk`.
    fn from_str(s: &str) -> Result<Self> {
        let mut c = Composition {
            question_chunk: false,
            bare_chunk: false,
            question_only: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "question_chunk" => c.question_chunk = true,
                "bare_chunk" => c.bare_chunk = true,
                "question_only" => c.question_only = true,
                other => {
                    return Err(Error::InvalidInput(format!("unknown document kind {other:?}")))
                }
            }
        }
        if c.is_empty() {
            return Err(Error::InvalidInput("composition selects no document kinds".into()));
        }
        Ok(c)
    }
}

/// Build statistics recorded alongside the manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildStats {
    pub index_seconds: f64,
    pub chunk_count: usize,
    pub group_count: usize,
    pub question_count: usize,
    pub document_count: usize,
    pub malformed_lines: usize,
    pub skipped_chunks: Vec<String>,
    pub chunks_without_questions: Vec<String>,
    pub count_deviations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub format_version: u32,
    pub embedder_id: String,
    pub dim: usize,
    pub generator_id: String,
    pub template_name: String,
    pub budget: QuestionBudget,
    pub composition: Composition,
    #[serde(default)]
    pub include_answers: bool,
    #[serde(default)]
    pub chunking: ChunkingPolicy,
    #[serde(default)]
    pub merge: Option<MergeSettings>,
    #[serde(default)]
    pub seed: u64,
    pub created_at: String,
    pub doc_count: usize,
    pub chunk_count: usize,
    #[serde(default)]
    pub build: Option<BuildStats>,
}

impl IndexManifest {
    /// An empty-index manifest for the given embedder; generation fields
    /// default to the basic template with an LLM-decided budget.
    pub fn new(embedder_id: impl Into<String>, dim: usize) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            embedder_id: embedder_id.into(),
            dim,
            generator_id: String::new(),
            template_name: String::new(),
            budget: QuestionBudget::LlmDecides,
            composition: Composition::default(),
            include_answers: false,
            chunking: ChunkingPolicy::default(),
            merge: None,
            seed: 0,
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            doc_count: 0,
            chunk_count: 0,
            build: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredHit {
    pub doc_key: String,
    pub score: f64,
    pub chunk_id: String,
    pub title: String,
    pub chunk_text: String,
    pub kind: DocKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
}

#[derive(Debug, Clone)]
pub struct VectorStore {
    manifest: IndexManifest,
    docs: Vec<IndexedDocument>,
    vectors: Vec<f32>,
    norms: Vec<f64>,
    keys: HashMap<String, usize>,
}

/// Descending score, then ascending doc key.
pub fn hit_order(a_score: f64, a_key: &str, b_score: f64, b_key: &str) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_key.cmp(b_key))
}

impl VectorStore {
    pub fn new(mut manifest: IndexManifest) -> Self {
        manifest.doc_count = 0;
        Self {
            manifest,
            docs: Vec::new(),
            vectors: Vec::new(),
            norms: Vec::new(),
            keys: HashMap::new(),
        }
    }

    pub fn manifest(&self) -> &IndexManifest {
        &self.manifest
    }

    pub fn manifest_mut(&mut self) -> &mut IndexManifest {
        &mut self.manifest
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> &[IndexedDocument] {
        &self.docs
    }

    pub fn get(&self, doc_key: &str) -> Option<&IndexedDocument> {
        self.keys.get(doc_key).map(|&i| &self.docs[i])
    }

    pub fn vector(&self, doc_key: &str) -> Option<&[f32]> {
        let dim = self.manifest.dim;
        self.keys.get(doc_key).map(|&i| &self.vectors[i * dim..(i + 1) * dim])
    }

    pub fn count_kind(&self, kind: DocKind) -> usize {
        self.docs.iter().filter(|d| d.kind == kind).count()
    }

    pub fn has_kind(&self, kind: DocKind) -> bool {
        self.docs.iter().any(|d| d.kind == kind)
    }

    /// Fail with `ManifestMismatch` unless `embedder_id` built this index.
    pub fn check_embedder(&self, embedder_id: &str) -> Result<()> {
        if embedder_id != self.manifest.embedder_id {
            return Err(Error::ManifestMismatch(format!(
                "index was built with embedder {:?}, query uses {embedder_id:?}",
                self.manifest.embedder_id
            )));
        }
        Ok(())
    }

    /// Append documents with their vectors. Validation happens up front, so
    /// a failed call leaves the store unchanged.
    pub fn add_documents(
        &mut self,
        docs: Vec<IndexedDocument>,
        vectors: Vec<EmbeddingVector>,
    ) -> Result<usize> {
        if docs.len() != vectors.len() {
            return Err(Error::InvalidInput(format!(
                "{} documents but {} vectors",
                docs.len(),
                vectors.len()
            )));
        }
        let mut batch_keys = std::collections::HashSet::new();
        for (doc, vector) in docs.iter().zip(&vectors) {
            if self.keys.contains_key(&doc.doc_key) || !batch_keys.insert(doc.doc_key.as_str()) {
                return Err(Error::DuplicateKey(doc.doc_key.clone()));
            }
            if doc.kind.is_question() && doc.question.as_deref().is_none_or(str::is_empty) {
                return Err(Error::InvalidInput(format!(
                    "question document {} has no question",
                    doc.doc_key
                )));
            }
            if vector.dim() != self.manifest.dim {
                return Err(Error::Protocol(format!(
                    "vector for {} has {} dims, index has {}",
                    doc.doc_key,
                    vector.dim(),
                    self.manifest.dim
                )));
            }
            if vector.embedder_id != self.manifest.embedder_id {
                return Err(Error::ManifestMismatch(format!(
                    "vector for {} came from {:?}, index uses {:?}",
                    doc.doc_key, vector.embedder_id, self.manifest.embedder_id
                )));
            }
            if norm(&vector.values) == 0.0 {
                return Err(Error::InvalidInput(format!("zero vector for {}", doc.doc_key)));
            }
        }
        let added = docs.len();
        for (doc, vector) in docs.into_iter().zip(vectors) {
            self.keys.insert(doc.doc_key.clone(), self.docs.len());
            self.norms.push(norm(&vector.values));
            self.vectors.extend_from_slice(&vector.values);
            self.docs.push(doc);
        }
        self.manifest.doc_count = self.docs.len();
        Ok(added)
    }

    /// Exact top-`n` by cosine similarity over every document.
    pub fn query_top_n(&self, vector: &EmbeddingVector, n: usize) -> Result<Vec<ScoredHit>> {
        self.query_top_n_where(vector, n, |_| true)
    }

    /// Exact top-`n` over the documents accepted by `filter`. Ties on score
    /// are ordered by ascending doc key.
    pub fn query_top_n_where(
        &self,
        vector: &EmbeddingVector,
        n: usize,
        filter: impl Fn(&IndexedDocument) -> bool,
    ) -> Result<Vec<ScoredHit>> {
        if self.docs.is_empty() {
            return Err(Error::EmptyIndex);
        }
        if n == 0 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        self.check_embedder(&vector.embedder_id)?;
        let dim = self.manifest.dim;
        if vector.dim() != dim {
            return Err(Error::Protocol(format!(
                "query has {} dims, index has {dim}",
                vector.dim()
            )));
        }
        let qnorm = norm(&vector.values);
        if qnorm == 0.0 {
            return Err(Error::InvalidInput("query vector is zero".into()));
        }

        let mut scored: Vec<(f64, usize)> = self
            .docs
            .iter()
            .enumerate()
            .filter(|(_, d)| filter(d))
            .map(|(i, _)| {
                let row = &self.vectors[i * dim..(i + 1) * dim];
                let s = dot(&vector.values, row) / (qnorm * self.norms[i]);
                (s.clamp(-1.0, 1.0), i)
            })
            .collect();

        let cmp = |a: &(f64, usize), b: &(f64, usize)| {
            hit_order(a.0, &self.docs[a.1].doc_key, b.0, &self.docs[b.1].doc_key)
        };
        if n < scored.len() {
            scored.select_nth_unstable_by(n - 1, cmp);
            scored.truncate(n);
        }
        scored.sort_by(cmp);

        Ok(scored
            .into_iter()
            .map(|(score, i)| {
                let d = &self.docs[i];
                ScoredHit {
                    doc_key: d.doc_key.clone(),
                    score,
                    chunk_id: d.chunk_id.clone(),
                    title: d.title.clone(),
                    chunk_text: d.chunk_text.clone(),
                    kind: d.kind,
                    question: d.question.clone(),
                }
            })
            .collect())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let manifest = serde_json::to_string_pretty(&self.manifest).map_err(std::io::Error::from)?;
        fs::write(dir.join(MANIFEST_FILE), manifest + "\n")?;

        let mut docs = BufWriter::new(fs::File::create(dir.join(DOCS_FILE))?);
        for doc in &self.docs {
            serde_json::to_writer(&mut docs, doc).map_err(std::io::Error::from)?;
            docs.write_all(b"\n")?;
        }
        docs.flush()?;

        let mut vectors = BufWriter::new(fs::File::create(dir.join(VECTORS_FILE))?);
        for v in &self.vectors {
            vectors.write_all(&v.to_le_bytes())?;
        }
        vectors.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::load(dir, "index directory not found"));
        }
        let manifest_path = dir.join(MANIFEST_FILE);
        let raw = fs::read_to_string(&manifest_path).map_err(|e| Error::corrupt(&manifest_path, e))?;
        let manifest: IndexManifest =
            serde_json::from_str(&raw).map_err(|e| Error::corrupt(&manifest_path, e))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::corrupt(
                &manifest_path,
                format!("unsupported format_version {}", manifest.format_version),
            ));
        }
        if manifest.dim == 0 {
            return Err(Error::corrupt(&manifest_path, "dim is zero"));
        }

        let docs_path = dir.join(DOCS_FILE);
        let file = fs::File::open(&docs_path).map_err(|e| Error::corrupt(&docs_path, e))?;
        let mut docs = Vec::with_capacity(manifest.doc_count);
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::corrupt(&docs_path, e))?;
            let doc: IndexedDocument = serde_json::from_str(&line)
                .map_err(|e| Error::corrupt(&docs_path, format!("line {}: {e}", lineno + 1)))?;
            docs.push(doc);
        }
        if docs.len() != manifest.doc_count {
            return Err(Error::corrupt(
                &docs_path,
                format!("{} documents, manifest says {}", docs.len(), manifest.doc_count),
            ));
        }

        let vectors_path = dir.join(VECTORS_FILE);
        let bytes = fs::read(&vectors_path).map_err(|e| Error::corrupt(&vectors_path, e))?;
        let expected = manifest.doc_count * manifest.dim * 4;
        if bytes.len() != expected {
            return Err(Error::corrupt(
                &vectors_path,
                format!("{} bytes, expected {expected}", bytes.len()),
            ));
        }
        let vectors: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();

        let mut keys = HashMap::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            if keys.insert(d.doc_key.clone(), i).is_some() {
                return Err(Error::corrupt(&docs_path, format!("duplicate doc_key {}", d.doc_key)));
            }
        }
        let dim = manifest.dim;
        let norms: Vec<f64> = (0..docs.len())
            .map(|i| norm(&vectors[i * dim..(i + 1) * dim]))
            .collect();
        if let Some(i) = norms.iter().position(|n| !n.is_finite() || *n == 0.0) {
            return Err(Error::corrupt(&vectors_path, format!("row {i} is zero or non-finite")));
        }
        Ok(Self {
            manifest,
            docs,
            vectors,
            norms,
            keys,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::MockEmbedder;

    fn doc(key: &str, kind: DocKind) -> IndexedDocument {
        IndexedDocument {
            doc_key: key.into(),
            kind,
            embed_text: key.into(),
            question: kind.is_question().then(|| format!("{key}?")),
            answer: None,
            chunk_id: format!("chunk-{key}"),
            title: "T".into(),
            chunk_text: "text".into(),
        }
    }

    fn store_with(keys: &[&str]) -> (VectorStore, MockEmbedder) {
        let m = MockEmbedder::new(8, 0);
        let mut s = VectorStore::new(IndexManifest::new(crate::embedding::EmbedderBackend::identity(&m), 8));
        let docs: Vec<_> = keys.iter().map(|k| doc(k, DocKind::BareChunk)).collect();
        let vecs: Vec<_> = keys
            .iter()
            .map(|k| EmbeddingVector::new(m.embed_one(k), s.manifest().embedder_id.clone()).unwrap())
            .collect();
        s.add_documents(docs, vecs).unwrap();
        (s, m)
    }

    fn probe(m: &MockEmbedder, text: &str) -> EmbeddingVector {
        EmbeddingVector::new(m.embed_one(text), crate::embedding::EmbedderBackend::identity(m)).unwrap()
    }

    #[test]
    fn add_three() {
        let (s, _) = store_with(&["a", "b", "c"]);
        assert_eq!(s.len(), 3);
        assert_eq!(s.manifest().doc_count, 3);
        assert!(s.get("b").is_some());
    }

    #[test]
    fn duplicate_key_leaves_store_unchanged() {
        let (mut s, m) = store_with(&["a", "b"]);
        let err = s
            .add_documents(
                vec![doc("z", DocKind::BareChunk), doc("a", DocKind::BareChunk)],
                vec![probe(&m, "z"), probe(&m, "a")],
            )
            .unwrap_err();
        assert!(matches!(err, Error::DuplicateKey(k) if k == "a"));
        assert_eq!(s.len(), 2);
        assert!(s.get("z").is_none());
    }

    #[test]
    fn wrong_dim_is_protocol_error() {
        let (mut s, _) = store_with(&["a"]);
        let v = EmbeddingVector::new(vec![1.0; 3], s.manifest().embedder_id.clone()).unwrap();
        assert!(matches!(
            s.add_documents(vec![doc("x", DocKind::BareChunk)], vec![v]),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn single_doc_clips_n() {
        let (s, m) = store_with(&["only"]);
        let hits = s.query_top_n(&probe(&m, "anything"), 10).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].doc_key, "only");
    }

    #[test]
    fn self_query_scores_one() {
        let (s, m) = store_with(&["a", "b", "c", "d"]);
        let hits = s.query_top_n(&probe(&m, "c"), 2).unwrap();
        assert_eq!(hits[0].doc_key, "c");
        assert!((hits[0].score - 1.0).abs() < 1e-6);
    }

    #[test]
    fn empty_store() {
        let m = MockEmbedder::new(8, 0);
        let s = VectorStore::new(IndexManifest::new(crate::embedding::EmbedderBackend::identity(&m), 8));
        assert!(matches!(s.query_top_n(&probe(&m, "q"), 1), Err(Error::EmptyIndex)));
    }

    #[test]
    fn foreign_embedder_is_manifest_mismatch() {
        let (s, _) = store_with(&["a"]);
        let other = MockEmbedder::new(8, 99);
        assert!(matches!(s.query_top_n(&probe(&other, "a"), 1), Err(Error::ManifestMismatch(_))));
    }

    #[test]
    fn ties_break_by_doc_key() {
        let m = MockEmbedder::new(4, 0);
        let id = crate::embedding::EmbedderBackend::identity(&m).to_string();
        let mut s = VectorStore::new(IndexManifest::new(id.clone(), 4));
        let same = EmbeddingVector::new(vec![1.0, 0.0, 0.0, 0.0], id.clone()).unwrap();
        s.add_documents(
            vec![doc("k2", DocKind::BareChunk), doc("k1", DocKind::BareChunk), doc("k3", DocKind::BareChunk)],
            vec![same.clone(), same.clone(), same.clone()],
        )
        .unwrap();
        let keys: Vec<_> = s.query_top_n(&same, 3).unwrap().into_iter().map(|h| h.doc_key).collect();
        assert_eq!(keys, vec!["k1", "k2", "k3"]);
    }

    #[test]
    fn composition_parsing() {
        let c: Composition = "question_chunk,bare_chunk".parse().unwrap();
        assert!(c.question_chunk && c.bare_chunk && !c.question_only);
        assert!("".parse::<Composition>().is_err());
        assert!("bogus".parse::<Composition>().is_err());
    }

    #[test]
    fn missing_directory_is_load_error() {
        assert!(matches!(VectorStore::load(Path::new("/nonexistent/index")), Err(Error::Load { .. })));
    }
}
