//! Pluggable text embedders and cosine similarity.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{BackendError, Error, Result};
use crate::http::HttpEndpoint;
use crate::question_gen::RetryPolicy;

pub const DEFAULT_BATCH_SIZE: usize = 64;

/// A finite vector tagged with the embedder that produced it. Values are
/// kept at storage precision (f32); similarity accumulates in f64.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub values: Vec<f32>,
    pub embedder_id: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>, embedder_id: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("embedding has zero dimensions".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("embedding value {i} is not finite")));
        }
        Ok(Self {
            values,
            embedder_id: embedder_id.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

pub(crate) fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let (na, nb) = (norm(&a.values), norm(&b.values));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidInput("cosine of a zero vector".into()));
    }
    Ok((dot(&a.values, &b.values) / (na * nb)).clamp(-1.0, 1.0))
}

/// Text embedder. Must be safe to call from several workers at once.
pub trait EmbedderBackend: Send + Sync {
    fn identity(&self) -> &str;
    fn dimension(&self) -> usize;
    /// One vector per input, in input order.
    fn embed_texts(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, BackendError>;
}

#[derive(Debug, Clone, Copy)]
pub struct EmbedOptions {
    pub batch_size: usize,
    /// Batches embedded concurrently; 1 is fully serial.
    pub workers: usize,
    pub retry: RetryPolicy,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        Self {
            batch_size: DEFAULT_BATCH_SIZE,
            workers: 1,
            retry: RetryPolicy::default(),
        }
    }
}

fn embed_one_batch(
    backend: &dyn EmbedderBackend,
    offset: usize,
    batch: &[&str],
    retry: &RetryPolicy,
) -> Result<Vec<EmbeddingVector>> {
    let raw = retry.run(|| backend.embed_texts(batch)).map_err(|e| match e {
        BackendError::Protocol(msg) => Error::Protocol(msg),
        BackendError::Transport(msg) => Error::Embedding {
            indices: (offset..offset + batch.len()).collect(),
            message: msg,
        },
    })?;
    if raw.len() != batch.len() {
        return Err(Error::Protocol(format!(
            "embedder returned {} vectors for {} texts",
            raw.len(),
            batch.len()
        )));
    }
    raw.into_iter()
        .enumerate()
        .map(|(i, values)| {
            if values.len() != backend.dimension() {
                return Err(Error::Protocol(format!(
                    "text {} embedded with {} dims, expected {}",
                    offset + i,
                    values.len(),
                    backend.dimension()
                )));
            }
            EmbeddingVector::new(values, backend.identity())
                .map_err(|e| Error::Protocol(format!("text {}: {e}", offset + i)))
        })
        .collect()
}

/// Embed `texts` in batches, preserving order.
pub fn embed_batch(
    backend: &dyn EmbedderBackend,
    texts: &[&str],
    opts: &EmbedOptions,
) -> Result<Vec<EmbeddingVector>> {
    if texts.is_empty() {
        return Err(Error::InvalidInput("nothing to embed".into()));
    }
    if let Some(i) = texts.iter().position(|t| t.is_empty()) {
        return Err(Error::InvalidInput(format!("text {i} is empty")));
    }
    let batch_size = opts.batch_size.max(1);
    let batches: Vec<(usize, &[&str])> = texts
        .chunks(batch_size)
        .enumerate()
        .map(|(i, b)| (i * batch_size, b))
        .collect();

    let results: Vec<Result<Vec<EmbeddingVector>>> = if opts.workers <= 1 || batches.len() == 1 {
        batches
            .iter()
            .map(|&(off, b)| embed_one_batch(backend, off, b, &opts.retry))
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
        pool.install(|| {
            batches
                .par_iter()
                .map(|&(off, b)| embed_one_batch(backend, off, b, &opts.retry))
                .collect()
        })
    };

    let mut out = Vec::with_capacity(texts.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

fn seeded_unit_vector(salt: u64, bytes: &[u8], dim: usize) -> Vec<f64> {
    let mut hasher = Sha256::new();
    hasher.update(salt.to_le_bytes());
    hasher.update(bytes);
    let seed: [u8; 32] = hasher.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(seed);
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

/// Pure offline embedder: each text maps to an L2-normalized Gaussian
/// vector drawn from a generator seeded by SHA-256(salt, text).
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    dim: usize,
    salt: u64,
    identity: String,
}

impl MockEmbedder {
    pub const PREFIX: &'static str = "mock-hash";

    pub fn new(dim: usize, salt: u64) -> Self {
        Self {
            dim: dim.max(1),
            salt,
            identity: format!("{}:dim={}:salt={salt}", Self::PREFIX, dim.max(1)),
        }
    }

    pub fn embed_one(&self, text: &str) -> Vec<f32> {
        seeded_unit_vector(self.salt, text.as_bytes(), self.dim)
            .into_iter()
            .map(|x| x as f32)
            .collect()
    }
}

impl EmbedderBackend for MockEmbedder {
    fn identity(&self) -> &str {
        &self.identity
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed_texts(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, BackendError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Offline bag-of-words embedder: the normalized sum of per-token seeded
/// Gaussian vectors. Texts sharing vocabulary land near each other, which
/// gives lexical-overlap retrieval without a model.
#[derive(Debug, Clone)]
pub struct TokenHashEmbedder {
    dim: usize,
    salt: u64,
    identity: String,
}

impl TokenHashEmbedder {
    pub const PREFIX: &'static str = "token-hash";

    pub fn new(dim: usize, salt: u64) -> Self {
        Self {
            dim: dim.max(1),
            salt,
            identity: format!("{}:dim={}:salt={salt}", Self::PREFIX, dim.max(1)),
        }
    }

    pub fn embed_one(&self, text: &str) -> Vec<f32> {
        let mut acc = vec![0.0f64; self.dim];
        let mut any = false;
        for token in text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
        {
            any = true;
            let v = seeded_unit_vector(self.salt, token.to_lowercase().as_bytes(), self.dim);
            acc.iter_mut().zip(v).for_each(|(a, x)| *a += x);
        }
        if !any {
            acc = seeded_unit_vector(self.salt, text.as_bytes(), self.dim);
        }
        let n = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        acc.into_iter().map(|x| (x / n) as f32).collect()
    }
}

impl EmbedderBackend for TokenHashEmbedder {
    fn identity(&self) -> &str {
        &self.identity
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed_texts(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, BackendError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Rebuild an offline embedder from its identity string, e.g.
/// `mock-hash:dim=64:salt=7`. Returns `None` for anything else.
pub fn offline_embedder_from_identity(identity: &str) -> Option<Box<dyn EmbedderBackend>> {
    let mut parts = identity.split(':');
    let kind = parts.next()?;
    let dim: usize = parts.next()?.strip_prefix("dim=")?.parse().ok()?;
    let salt: u64 = parts.next()?.strip_prefix("salt=")?.parse().ok()?;
    if parts.next().is_some() {
        return None;
    }
    match kind {
        MockEmbedder::PREFIX => Some(Box::new(MockEmbedder::new(dim, salt))),
        TokenHashEmbedder::PREFIX => Some(Box::new(TokenHashEmbedder::new(dim, salt))),
        _ => None,
    }
}

/// Embeddings endpoint of an OpenAI-compatible server.
pub struct HttpEmbedder {
    endpoint: HttpEndpoint,
    dimension: usize,
}

impl HttpEmbedder {
    pub fn new(endpoint: HttpEndpoint, dimension: usize) -> Self {
        Self {
            endpoint,
            dimension,
        }
    }
}

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f32>,
    #[serde(default)]
    index: Option<usize>,
}

pub(crate) fn parse_embeddings_response(body: &str) -> Result<Vec<Vec<f32>>, BackendError> {
    let mut parsed: EmbeddingsResponse = serde_json::from_str(body)
        .map_err(|e| BackendError::Protocol(format!("bad embeddings response: {e}")))?;
    if parsed.data.iter().all(|d| d.index.is_some()) {
        parsed.data.sort_by_key(|d| d.index);
    }
    Ok(parsed.data.into_iter().map(|d| d.embedding).collect())
}

impl EmbedderBackend for HttpEmbedder {
    fn identity(&self) -> &str {
        &self.endpoint.model
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_texts(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, BackendError> {
        let body = serde_json::json!({ "model": self.endpoint.model, "input": texts });
        let text = self.endpoint.post_json("embeddings", &body)?;
        parse_embeddings_response(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(values: &[f32]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec(), "t").unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&v(&[1.0, 0.0]), &v(&[1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        // 32 / sqrt(14 * 77), evaluated with 40-digit arithmetic
        let c = cosine_similarity(&v(&[1.0, 2.0, 3.0]), &v(&[4.0, 5.0, 6.0])).unwrap();
        assert!((c - 0.974_631_846_197_076_2).abs() < 1e-6);
    }

    #[test]
    fn cosine_rejects_bad_input() {
        assert!(cosine_similarity(&v(&[1.0]), &v(&[1.0, 2.0])).is_err());
        assert!(cosine_similarity(&v(&[0.0, 0.0]), &v(&[1.0, 2.0])).is_err());
        assert!(EmbeddingVector::new(vec![f32::NAN], "t").is_err());
    }

    #[test]
    fn mock_is_deterministic_and_distinguishes_texts() {
        let m = MockEmbedder::new(8, 0);
        let out = embed_batch(&m, &["a", "a", "b"], &EmbedOptions::default()).unwrap();
        assert_eq!(out[0], out[1]);
        assert_ne!(out[0], out[2]);
        assert!(out.iter().all(|e| e.dim() == 8 && e.embedder_id == m.identity()));
    }

    #[test]
    fn salt_changes_vectors() {
        assert_ne!(MockEmbedder::new(8, 0).embed_one("a"), MockEmbedder::new(8, 1).embed_one("a"));
    }

    #[test]
    fn batching_preserves_order() {
        let m = MockEmbedder::new(16, 3);
        let texts: Vec<String> = (0..1000).map(|i| format!("text {i}")).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let opts = EmbedOptions {
            batch_size: 64,
            workers: 4,
            ..Default::default()
        };
        let batched = embed_batch(&m, &refs, &opts).unwrap();
        assert_eq!(batched.len(), 1000);
        for (t, e) in refs.iter().zip(&batched) {
            assert_eq!(e.values, m.embed_one(t));
        }
    }

    #[test]
    fn empty_inputs_rejected() {
        let m = MockEmbedder::new(4, 0);
        assert!(matches!(embed_batch(&m, &[], &EmbedOptions::default()), Err(Error::InvalidInput(_))));
        assert!(matches!(embed_batch(&m, &["x", ""], &EmbedOptions::default()), Err(Error::InvalidInput(_))));
    }

    struct WrongDim;
    impl EmbedderBackend for WrongDim {
        fn identity(&self) -> &str {
            "wrong"
        }
        fn dimension(&self) -> usize {
            4
        }
        fn embed_texts(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, BackendError> {
            Ok(texts.iter().map(|_| vec![1.0; 3]).collect())
        }
    }

    struct Down;
    impl EmbedderBackend for Down {
        fn identity(&self) -> &str {
            "down"
        }
        fn dimension(&self) -> usize {
            4
        }
        fn embed_texts(&self, _: &[&str]) -> Result<Vec<Vec<f32>>, BackendError> {
            Err(BackendError::Transport("refused".into()))
        }
    }

    #[test]
    fn dimension_mismatch_is_protocol_error() {
        assert!(matches!(
            embed_batch(&WrongDim, &["a"], &EmbedOptions::default()),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn transport_failure_reports_batch_indices() {
        let opts = EmbedOptions {
            batch_size: 2,
            workers: 1,
            retry: RetryPolicy::none(),
        };
        match embed_batch(&Down, &["a", "b", "c"], &opts) {
            Err(Error::Embedding { indices, .. }) => assert_eq!(indices, vec![0, 1]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn token_hash_rewards_overlap() {
        let e = TokenHashEmbedder::new(128, 0);
        let q = v(&e.embed_one("capital of france"));
        let near = v(&e.embed_one("Paris is the capital of France"));
        let far = v(&e.embed_one("Photosynthesis converts light energy"));
        assert!(cosine_similarity(&q, &near).unwrap() > cosine_similarity(&q, &far).unwrap());
    }

    #[test]
    fn identities_round_trip() {
        for id in [MockEmbedder::new(12, 5).identity().to_string(), TokenHashEmbedder::new(7, 1).identity().to_string()] {
            assert_eq!(offline_embedder_from_identity(&id).unwrap().identity(), id);
        }
        assert!(offline_embedder_from_identity("text-embedding-3-small").is_none());
    }

    #[test]
    fn embeddings_response_sorted_by_index() {
        let body = r#"{"data":[{"embedding":[2.0],"index":1},{"embedding":[1.0],"index":0}]}"#;
        assert_eq!(parse_embeddings_response(body).unwrap(), vec![vec![1.0], vec![2.0]]);
    }
}
