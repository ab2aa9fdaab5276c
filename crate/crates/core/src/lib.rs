//! Question-oriented retrieval: chunks are indexed by the questions they
//! answer, and queries are matched against those questions.
//!
//! The pipeline is [`corpus`] (chunking and near-duplicate merging) →
//! [`question_gen`] (prompting and parsing) → [`builder`] (documents and
//! vectors in a [`store::VectorStore`]) → [`retrieval`] (naive, quote and
//! hyde modes) → [`eval`] (metrics and analysis).

pub mod builder;
pub mod config;
pub mod corpus;
pub mod datasets;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod http;
pub mod question_gen;
pub mod retrieval;
pub mod store;

pub use builder::{build_index, BuildOptions, BuildOutput};
pub use corpus::{split_corpus, Chunk, ChunkingPolicy, Document};
pub use embedding::{EmbedderBackend, EmbeddingVector, MockEmbedder, TokenHashEmbedder};
pub use error::{BackendError, Error, Result};
pub use question_gen::{GeneratorBackend, MockGenerator, PromptTemplate, QuestionBudget, TemplateName};
pub use retrieval::{RetrievalConfig, RetrievalMode, RetrievalResult, Retriever};
pub use store::{Composition, DocKind, VectorStore};
