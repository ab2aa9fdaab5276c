//! Index construction: chunk -> generated questions -> documents -> vectors.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{merge_similar_chunks, singleton_groups, Chunk, ChunkGroup, ChunkingPolicy, MergeSettings};
use crate::embedding::{embed_batch, EmbedOptions, EmbedderBackend};
use crate::error::{Error, Result};
use crate::question_gen::{
    generate_questions, GeneratedQA, GeneratorBackend, PromptTemplate, QuestionBudget, RetryPolicy,
};
use crate::store::{BuildStats, Composition, DocKind, IndexManifest, IndexedDocument, VectorStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationErrorPolicy {
    /// Record the chunk and keep building.
    #[default]
    Skip,
    Abort,
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub template: PromptTemplate,
    pub budget: QuestionBudget,
    pub composition: Composition,
    /// Append each generated answer to the embedded question text.
    pub include_answers: bool,
    pub chunking: ChunkingPolicy,
    pub merge: Option<MergeSettings>,
    pub retry: RetryPolicy,
    pub workers: usize,
    pub batch_size: usize,
    pub on_generation_error: GenerationErrorPolicy,
    pub seed: u64,
    /// Keep prompt/completion pairs in the report.
    pub audit: bool,
}

impl BuildOptions {
    pub fn new(template: PromptTemplate, budget: QuestionBudget) -> Self {
        Self {
            template,
            budget,
            composition: Composition::default(),
            include_answers: false,
            chunking: ChunkingPolicy::default(),
            merge: None,
            retry: RetryPolicy::default(),
            workers: 1,
            batch_size: crate::embedding::DEFAULT_BATCH_SIZE,
            on_generation_error: GenerationErrorPolicy::Skip,
            seed: 0,
            audit: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub chunk_id: String,
    pub prompt: String,
    pub completion: String,
}

#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub store: VectorStore,
    pub stats: BuildStats,
    pub groups: Vec<ChunkGroup>,
    pub audit: Vec<AuditRecord>,
}

struct ChunkQuestions {
    pairs: Vec<GeneratedQA>,
    malformed: usize,
    deviations: usize,
    failed: bool,
    audit: Vec<AuditRecord>,
}

fn question_embed_text(qa: &GeneratedQA, include_answer: bool) -> String {
    if include_answer && !qa.answer.is_empty() {
        format!("{} {}", qa.question, qa.answer)
    } else {
        qa.question.clone()
    }
}

/// Build an index over `chunks`. When merging is configured, every member
/// of a group contributes its generated questions and all documents point
/// at the group's representative chunk.
pub fn build_index(
    chunks: &[Chunk],
    generator: &dyn GeneratorBackend,
    embedder: &dyn EmbedderBackend,
    opts: &BuildOptions,
) -> Result<BuildOutput> {
    let started = Instant::now();
    if chunks.is_empty() {
        return Err(Error::InvalidInput("no chunks to index".into()));
    }
    if opts.composition.is_empty() {
        return Err(Error::InvalidInput("composition selects no document kinds".into()));
    }
    opts.template.validate()?;

    let groups = match &opts.merge {
        Some(m) => merge_similar_chunks(chunks, m.threshold, m.scope)?,
        None => singleton_groups(chunks),
    };
    let by_id: std::collections::HashMap<&str, &Chunk> =
        chunks.iter().map(|c| (c.chunk_id.as_str(), c)).collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;

    let per_group: Vec<Result<ChunkQuestions>> = if opts.composition.needs_questions() {
        pool.install(|| {
            groups
                .par_iter()
                .map(|g| generate_for_group(g, &by_id, generator, opts))
                .collect()
        })
    } else {
        groups
            .iter()
            .map(|_| {
                Ok(ChunkQuestions {
                    pairs: Vec::new(),
                    malformed: 0,
                    deviations: 0,
                    failed: false,
                    audit: Vec::new(),
                })
            })
            .collect()
    };

    let mut stats = BuildStats {
        chunk_count: chunks.len(),
        group_count: groups.len(),
        ..Default::default()
    };
    let mut audit = Vec::new();
    let mut docs = Vec::new();
    for (group, result) in groups.iter().zip(per_group) {
        let qs = result?;
        let rep = &group.representative;
        stats.malformed_lines += qs.malformed;
        stats.count_deviations += qs.deviations;
        stats.question_count += qs.pairs.len();
        audit.extend(qs.audit);
        if qs.failed {
            stats.skipped_chunks.push(group.group_id.clone());
        } else if opts.composition.needs_questions() && qs.pairs.is_empty() {
            stats.chunks_without_questions.push(group.group_id.clone());
        }

        for (i, qa) in qs.pairs.iter().enumerate() {
            let q_text = question_embed_text(qa, opts.include_answers);
            let base = IndexedDocument {
                doc_key: String::new(),
                kind: DocKind::QuestionChunk,
                embed_text: String::new(),
                question: Some(qa.question.clone()),
                answer: Some(qa.answer.clone()).filter(|a| !a.is_empty()),
                chunk_id: group.group_id.clone(),
                title: rep.title.clone(),
                chunk_text: rep.text.clone(),
            };
            if opts.composition.question_chunk {
                docs.push(IndexedDocument {
                    doc_key: format!("{}:q{i}", group.group_id),
                    embed_text: format!("{q_text}\n{}", rep.text),
                    ..base.clone()
                });
            }
            if opts.composition.question_only {
                docs.push(IndexedDocument {
                    doc_key: format!("{}:o{i}", group.group_id),
                    kind: DocKind::QuestionOnly,
                    embed_text: q_text,
                    ..base
                });
            }
        }
        if opts.composition.bare_chunk {
            docs.push(IndexedDocument {
                doc_key: format!("{}:c", group.group_id),
                kind: DocKind::BareChunk,
                embed_text: rep.text.clone(),
                question: None,
                answer: None,
                chunk_id: group.group_id.clone(),
                title: rep.title.clone(),
                chunk_text: rep.text.clone(),
            });
        }
    }

    let mut manifest = IndexManifest::new(embedder.identity(), embedder.dimension());
    manifest.generator_id = generator.identity().to_string();
    manifest.template_name = opts.template.name.to_string();
    manifest.budget = opts.budget;
    manifest.composition = opts.composition;
    manifest.include_answers = opts.include_answers;
    manifest.chunking = opts.chunking;
    manifest.merge = opts.merge;
    manifest.seed = opts.seed;
    manifest.chunk_count = groups.len();
    let mut store = VectorStore::new(manifest);

    if docs.is_empty() {
        return Err(Error::InvalidInput(
            "build produced no documents (no questions were generated)".into(),
        ));
    }
    let texts: Vec<&str> = docs.iter().map(|d| d.embed_text.as_str()).collect();
    let vectors = embed_batch(
        embedder,
        &texts,
        &EmbedOptions {
            batch_size: opts.batch_size,
            workers: opts.workers,
            retry: opts.retry,
        },
    )?;
    store.add_documents(docs, vectors)?;

    stats.document_count = store.len();
    stats.index_seconds = started.elapsed().as_secs_f64();
    store.manifest_mut().build = Some(stats.clone());
    Ok(BuildOutput {
        store,
        stats,
        groups,
        audit,
    })
}

fn generate_for_group(
    group: &ChunkGroup,
    by_id: &std::collections::HashMap<&str, &Chunk>,
    generator: &dyn GeneratorBackend,
    opts: &BuildOptions,
) -> Result<ChunkQuestions> {
    let mut out = ChunkQuestions {
        pairs: Vec::new(),
        malformed: 0,
        deviations: 0,
        failed: false,
        audit: Vec::new(),
    };
    for member in &group.members {
        let chunk = by_id[member.as_str()];
        match generate_questions(chunk, generator, &opts.template, &opts.budget, &opts.retry) {
            Ok(outcome) => {
                out.malformed += outcome.malformed;
                out.deviations += usize::from(outcome.count_deviation.is_some());
                if opts.audit {
                    out.audit.push(AuditRecord {
                        chunk_id: chunk.chunk_id.clone(),
                        prompt: outcome.prompt,
                        completion: outcome.completion,
                    });
                }
                out.pairs.extend(outcome.pairs.into_iter().map(|mut qa| {
                    qa.chunk_id = group.group_id.clone();
                    qa
                }));
            }
            Err(e @ Error::Generation { .. }) => match opts.on_generation_error {
                GenerationErrorPolicy::Abort => return Err(e),
                GenerationErrorPolicy::Skip => {
                    log::warn!("{e}; chunk skipped");
                    out.failed = true;
                }
            },
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
