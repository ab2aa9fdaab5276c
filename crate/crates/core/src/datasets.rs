//! Loaders for SQuAD v1.1, simplified Natural Questions JSONL and
//! MultiHop-RAG.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_whitespace, ChunkingPolicy, Document};
use crate::error::{Error, Result};

pub const MULTIHOP_SENTENCES_PER_BLOCK: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Squad,
    Nq,
    Multihop,
}

impl DatasetKind {
    pub fn default_chunking(self) -> ChunkingPolicy {
        match self {
            DatasetKind::Squad | DatasetKind::Nq => ChunkingPolicy::paragraph(),
            DatasetKind::Multihop => ChunkingPolicy::sentence_blocks(MULTIHOP_SENTENCES_PER_BLOCK),
        }
    }

    pub fn is_multihop(self) -> bool {
        self == DatasetKind::Multihop
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::Squad => "squad",
            DatasetKind::Nq => "nq",
            DatasetKind::Multihop => "multihop",
        })
    }
}

impl std::str::FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squad" => Ok(DatasetKind::Squad),
            "nq" => Ok(DatasetKind::Nq),
            "multihop" => Ok(DatasetKind::Multihop),
            _ => Err(Error::InvalidInput(format!("unknown dataset {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingleHopQuery {
    pub query_id: String,
    pub question: String,
    pub gt_title: String,
    pub gt_context: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub doc_id: String,
    #[serde(default)]
    pub fact: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiHopQuery {
    pub query_id: String,
    pub question: String,
    pub evidence: Vec<Evidence>,
}

#[derive(Debug, Clone, Default)]
pub struct SingleHopDataset {
    pub documents: Vec<Document>,
    pub queries: Vec<SingleHopQuery>,
}

#[derive(Debug, Clone, Default)]
pub struct MultiHopDataset {
    pub documents: Vec<Document>,
    pub queries: Vec<MultiHopQuery>,
    /// Query ids dropped at load time because they list no evidence.
    pub excluded: Vec<String>,
}

/// Paragraph text with internal blank lines folded so that joining
/// paragraphs with `\n\n` keeps one chunk per paragraph.
fn fold_paragraph(text: &str) -> String {
    text.lines()
        .map(str::trim_end)
        .filter(|l| !l.trim().is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Groups paragraphs by title in first-seen order.
#[derive(Default)]
struct DocumentAssembler {
    order: Vec<String>,
    paragraphs: HashMap<String, Vec<String>>,
    seen: HashSet<(String, String)>,
}

impl DocumentAssembler {
    /// Returns the folded paragraph text; duplicates within a title are
    /// stored once.
    fn push(&mut self, title: &str, paragraph: &str, dedup: bool) -> String {
        let folded = fold_paragraph(paragraph);
        if dedup && !self.seen.insert((title.to_string(), normalize_whitespace(&folded))) {
            return folded;
        }
        if !self.paragraphs.contains_key(title) {
            self.order.push(title.to_string());
        }
        self.paragraphs
            .entry(title.to_string())
            .or_default()
            .push(folded.clone());
        folded
    }

    fn finish(self) -> Vec<Document> {
        let mut paragraphs = self.paragraphs;
        self.order
            .into_iter()
            .map(|title| {
                let body = paragraphs.remove(&title).unwrap_or_default().join("\n\n");
                Document {
                    doc_id: title.clone(),
                    title,
                    body,
                }
            })
            .collect()
    }
}

#[derive(Deserialize)]
struct SquadFile {
    data: Vec<SquadArticle>,
}

#[derive(Deserialize)]
struct SquadArticle {
    title: String,
    paragraphs: Vec<SquadParagraph>,
}

#[derive(Deserialize)]
struct SquadParagraph {
    context: String,
    qas: Vec<SquadQa>,
}

#[derive(Deserialize)]
struct SquadQa {
    id: String,
    question: String,
}

pub fn load_squad(path: &Path) -> Result<SingleHopDataset> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::load(path, e))?;
    let file: SquadFile = serde_json::from_str(&raw).map_err(|e| Error::load(path, e))?;
    let mut assembler = DocumentAssembler::default();
    let mut queries = Vec::new();
    for article in file.data {
        for para in article.paragraphs {
            if para.context.trim().is_empty() {
                continue;
            }
            let context = assembler.push(&article.title, &para.context, false);
            for qa in para.qas {
                queries.push(SingleHopQuery {
                    query_id: qa.id,
                    question: qa.question,
                    gt_title: article.title.clone(),
                    gt_context: context.clone(),
                });
            }
        }
    }
    Ok(SingleHopDataset {
        documents: assembler.finish(),
        queries,
    })
}

#[derive(Deserialize)]
struct NqLine {
    #[serde(default)]
    id: Option<serde_json::Value>,
    #[serde(alias = "question")]
    query: String,
    title: String,
    #[serde(alias = "context", alias = "paragraph")]
    long_answer: String,
}

/// Simplified Natural Questions: one `{"query", "title", "long_answer"}`
/// object per line (`question` / `context` accepted as aliases).
pub fn load_nq(path: &Path) -> Result<SingleHopDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::load(path, e))?;
    let mut assembler = DocumentAssembler::default();
    let mut queries = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::load(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: NqLine = serde_json::from_str(&line)
            .map_err(|e| Error::load(path, format!("line {}: {e}", lineno + 1)))?;
        if rec.long_answer.trim().is_empty() {
            return Err(Error::load(path, format!("line {}: empty long_answer", lineno + 1)));
        }
        let context = assembler.push(&rec.title, &rec.long_answer, true);
        let query_id = match rec.id {
            Some(serde_json::Value::String(s)) => s,
            Some(v) => v.to_string(),
            None => format!("nq-{lineno}"),
        };
        queries.push(SingleHopQuery {
            query_id,
            question: rec.query,
            gt_title: rec.title,
            gt_context: context,
        });
    }
    Ok(SingleHopDataset {
        documents: assembler.finish(),
        queries,
    })
}

#[derive(Deserialize)]
struct MultiHopArticle {
    title: String,
    body: String,
    #[serde(default)]
    url: Option<String>,
}

#[derive(Deserialize)]
struct MultiHopRecord {
    query: String,
    #[serde(default)]
    evidence_list: Vec<MultiHopEvidence>,
}

#[derive(Deserialize)]
struct MultiHopEvidence {
    #[serde(default)]
    fact: Option<String>,
    #[serde(default)]
    url: Option<String>,
    #[serde(default)]
    title: Option<String>,
}

fn article_id(url: &Option<String>, title: &str) -> String {
    match url {
        Some(u) if !u.trim().is_empty() => u.clone(),
        _ => title.to_string(),
    }
}

/// Locate `corpus.json` and `MultiHopRAG.json` when given a directory.
pub fn multihop_paths(data: &Path, queries: Option<&Path>) -> (PathBuf, PathBuf) {
    if data.is_dir() {
        (
            data.join("corpus.json"),
            queries.map_or_else(|| data.join("MultiHopRAG.json"), Path::to_path_buf),
        )
    } else {
        let q = queries.map(Path::to_path_buf).unwrap_or_else(|| {
            data.with_file_name("MultiHopRAG.json")
        });
        (data.to_path_buf(), q)
    }
}

/// MultiHop-RAG corpus (array of articles) plus its query file. Documents
/// are keyed by URL, falling back to title.
pub fn load_multihop(corpus_path: &Path, queries_path: &Path) -> Result<MultiHopDataset> {
    let raw = std::fs::read_to_string(corpus_path).map_err(|e| Error::load(corpus_path, e))?;
    let articles: Vec<MultiHopArticle> =
        serde_json::from_str(&raw).map_err(|e| Error::load(corpus_path, e))?;
    let mut seen = HashSet::new();
    let mut documents = Vec::new();
    for a in articles {
        let doc_id = article_id(&a.url, &a.title);
        if a.body.trim().is_empty() || !seen.insert(doc_id.clone()) {
            continue;
        }
        documents.push(Document {
            doc_id,
            title: a.title,
            body: a.body,
        });
    }

    let raw = std::fs::read_to_string(queries_path).map_err(|e| Error::load(queries_path, e))?;
    let records: Vec<MultiHopRecord> =
        serde_json::from_str(&raw).map_err(|e| Error::load(queries_path, e))?;
    let mut queries = Vec::new();
    let mut excluded = Vec::new();
    for (i, r) in records.into_iter().enumerate() {
        let query_id = format!("mh-{i}");
        if r.evidence_list.is_empty() {
            excluded.push(query_id);
            continue;
        }
        let evidence = r
            .evidence_list
            .into_iter()
            .map(|e| Evidence {
                doc_id: article_id(&e.url, e.title.as_deref().unwrap_or_default()),
                fact: e.fact.filter(|f| !f.trim().is_empty()),
            })
            .collect();
        queries.push(MultiHopQuery {
            query_id,
            question: r.query,
            evidence,
        });
    }
    Ok(MultiHopDataset {
        documents,
        queries,
        excluded,
    })
}

/// Documents of any dataset, for index building.
pub fn load_documents(kind: DatasetKind, data: &Path, queries: Option<&Path>) -> Result<Vec<Document>> {
    match kind {
        DatasetKind::Squad => Ok(load_squad(data)?.documents),
        DatasetKind::Nq => Ok(load_nq(data)?.documents),
        DatasetKind::Multihop => {
            let (c, q) = multihop_paths(data, queries);
            Ok(load_multihop(&c, &q)?.documents)
        }
    }
}
