//! Corpus loading, chunking and near-duplicate merging.
//!
//! Documents are split into [`Chunk`]s either per paragraph (blank-line
//! separated) or in fixed-size blocks of sentences. Chunk ids are content
//! hashes so that two builds over the same corpus produce the same ids.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Default Jaccard threshold used when merging near-duplicate chunks.
pub const DEFAULT_MERGE_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub title: String,
    pub ordinal: usize,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkingMode {
    Paragraph,
    SentenceBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkingPolicy {
    pub mode: ChunkingMode,
    pub sentences_per_block: usize,
}

impl ChunkingPolicy {
    pub fn paragraph() -> Self {
        Self {
            mode: ChunkingMode::Paragraph,
            sentences_per_block: 1,
        }
    }

    pub fn sentence_blocks(sentences_per_block: usize) -> Self {
        Self {
            mode: ChunkingMode::SentenceBlock,
            sentences_per_block,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sentences_per_block == 0 {
            return Err(Error::InvalidInput(
                "sentences_per_block must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

impl Default for ChunkingPolicy {
    fn default() -> Self {
        Self::paragraph()
    }
}

/// Output of [`split_corpus`]: the chunks plus the ids of documents that
/// produced no text and were skipped.
#[derive(Debug, Clone, Default)]
pub struct SplitOutput {
    pub chunks: Vec<Chunk>,
    pub skipped_docs: Vec<String>,
}

/// Collapse every whitespace run to a single space and trim the ends.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Deterministic id: truncated SHA-256 over doc id, ordinal and normalized text.
pub fn chunk_id(doc_id: &str, ordinal: usize, text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(doc_id.as_bytes());
    hasher.update([0x1f]);
    hasher.update(ordinal.to_string().as_bytes());
    hasher.update([0x1f]);
    hasher.update(normalize_whitespace(text).as_bytes());
    hex::encode(&hasher.finalize()[..16])
}

fn validate_documents(documents: &[Document]) -> Result<()> {
    if documents.is_empty() {
        return Err(Error::InvalidInput("corpus contains no documents".into()));
    }
    let mut seen = HashSet::new();
    for doc in documents {
        if doc.doc_id.is_empty() {
            return Err(Error::InvalidInput("document with empty doc_id".into()));
        }
        if !seen.insert(doc.doc_id.as_str()) {
            return Err(Error::InvalidInput(format!(
                "duplicate doc_id {:?}",
                doc.doc_id
            )));
        }
    }
    Ok(())
}

pub fn split_corpus(documents: &[Document], policy: &ChunkingPolicy) -> Result<SplitOutput> {
    validate_documents(documents)?;
    policy.validate()?;

    let mut out = SplitOutput::default();
    for doc in documents {
        let spans = match policy.mode {
            ChunkingMode::Paragraph => paragraph_spans(&doc.body),
            ChunkingMode::SentenceBlock => {
                let sentences: Vec<(usize, usize)> = paragraph_spans(&doc.body)
                    .into_iter()
                    .flat_map(|(start, end)| {
                        sentence_spans(&doc.body[start..end])
                            .into_iter()
                            .map(move |(s, e)| (start + s, start + e))
                    })
                    .collect();
                sentences
                    .chunks(policy.sentences_per_block)
                    .map(|block| (block[0].0, block[block.len() - 1].1))
                    .collect()
            }
        };
        if spans.is_empty() {
            log::warn!("document {} yields no text; skipped", doc.doc_id);
            out.skipped_docs.push(doc.doc_id.clone());
            continue;
        }
        for (ordinal, (start, end)) in spans.into_iter().enumerate() {
            let text = &doc.body[start..end];
            out.chunks.push(Chunk {
                chunk_id: chunk_id(&doc.doc_id, ordinal, text),
                doc_id: doc.doc_id.clone(),
                title: doc.title.clone(),
                ordinal,
                text: text.to_string(),
            });
        }
    }
    Ok(out)
}

fn trimmed(text: &str, start: usize, end: usize) -> Option<(usize, usize)> {
    let slice = &text[start..end];
    let lead = slice.len() - slice.trim_start().len();
    let trail = slice.len() - slice.trim_end().len();
    if lead == slice.len() {
        None
    } else {
        Some((start + lead, end - trail))
    }
}

/// Byte spans of blank-line separated paragraphs, trimmed.
pub fn paragraph_spans(text: &str) -> Vec<(usize, usize)> {
    static BLANK_LINE: OnceLock<Regex> = OnceLock::new();
    let re = BLANK_LINE.get_or_init(|| Regex::new(r"\n[ \t\r\f\v]*\n").expect("valid regex"));
    let mut spans = Vec::new();
    let mut cursor = 0;
    for m in re.find_iter(text) {
        spans.extend(trimmed(text, cursor, m.start()));
        cursor = m.end();
    }
    spans.extend(trimmed(text, cursor, text.len()));
    spans
}

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "vs", "etc", "e.g", "i.e", "inc",
    "ltd", "co", "corp", "no", "vol", "fig", "gen", "gov", "sen", "rep", "col", "lt", "capt",
    "approx", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec",
    "u.s", "u.k", "u.n", "a.m", "p.m", "cf", "al",
];

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '\u{201c}' | '\u{2018}')
}

/// The whitespace-delimited word ending just before byte offset `period`.
fn word_before(text: &str, period: usize) -> &str {
    let head = &text[..period];
    let start = head
        .rfind(char::is_whitespace)
        .map(|i| i + head[i..].chars().next().map_or(1, char::len_utf8))
        .unwrap_or(0);
    head[start..].trim_start_matches(|c: char| is_opener(c))
}

fn is_abbreviation(word: &str) -> bool {
    let lower = word.to_lowercase();
    if ABBREVIATIONS.contains(&lower.as_str()) {
        return true;
    }
    // single-letter initials such as "J." in "J. R. R. Tolkien"
    let mut chars = word.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if c.is_uppercase())
}

/// Rule-based sentence segmentation. A sentence ends at `.`, `!` or `?`
/// (plus trailing closing quotes/brackets) when followed by whitespace and
/// an uppercase letter or opening quote, unless the period ends an
/// abbreviation. Returned spans are trimmed byte ranges.
pub fn sentence_spans(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let byte_at = |i: usize| if i < n { chars[i].0 } else { text.len() };

    let mut spans = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < n {
        let c = chars[i].1;
        if !matches!(c, '.' | '!' | '?') {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < n && matches!(chars[j].1, '.' | '!' | '?') {
            j += 1;
        }
        while j < n && is_closer(chars[j].1) {
            j += 1;
        }
        if j >= n || !chars[j].1.is_whitespace() {
            i = j.max(i + 1);
            continue;
        }
        let mut k = j;
        while k < n && chars[k].1.is_whitespace() {
            k += 1;
        }
        if k >= n {
            break;
        }
        let next = chars[k].1;
        let starts_sentence = next.is_uppercase() || is_opener(next);
        let abbreviated = c == '.' && j == i + 1 && is_abbreviation(word_before(text, chars[i].0));
        if starts_sentence && !abbreviated {
            spans.extend(trimmed(text, start, byte_at(j)));
            start = byte_at(k);
        }
        i = k;
    }
    spans.extend(trimmed(text, start, text.len()));
    spans
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeScope {
    #[default]
    WithinTitle,
    Corpus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeSettings {
    pub threshold: f64,
    #[serde(default)]
    pub scope: MergeScope,
}

/// A set of near-duplicate chunks scored as one retrieval target.
/// `group_id` is the representative's chunk id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkGroup {
    pub group_id: String,
    pub members: Vec<String>,
    pub representative: Chunk,
}

/// Lowercased, punctuation-stripped word tokens.
pub fn similarity_tokens(text: &str) -> HashSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn jaccard_sets(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Token-level Jaccard similarity used for chunk merging.
pub fn token_jaccard(a: &str, b: &str) -> f64 {
    jaccard_sets(&similarity_tokens(a), &similarity_tokens(b))
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Group chunks whose token Jaccard similarity meets `threshold`, closing
/// transitively. Groups are ordered by their first member's input position;
/// the representative is the member with the lowest ordinal.
pub fn merge_similar_chunks(
    chunks: &[Chunk],
    threshold: f64,
    scope: MergeScope,
) -> Result<Vec<ChunkGroup>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidInput(format!(
            "merge threshold {threshold} outside [0, 1]"
        )));
    }
    let mut ids = HashSet::new();
    for chunk in chunks {
        if !ids.insert(chunk.chunk_id.as_str()) {
            return Err(Error::InvalidInput(format!(
                "duplicate chunk_id {}",
                chunk.chunk_id
            )));
        }
    }

    let tokens: Vec<HashSet<String>> = chunks.iter().map(|c| similarity_tokens(&c.text)).collect();
    let mut buckets: Vec<Vec<usize>> = Vec::new();
    let mut bucket_of: HashMap<&str, usize> = HashMap::new();
    for (i, chunk) in chunks.iter().enumerate() {
        let key = match scope {
            MergeScope::WithinTitle => chunk.title.as_str(),
            MergeScope::Corpus => "",
        };
        let b = *bucket_of.entry(key).or_insert_with(|| {
            buckets.push(Vec::new());
            buckets.len() - 1
        });
        buckets[b].push(i);
    }

    let mut uf = UnionFind::new(chunks.len());
    for bucket in &buckets {
        for (x, &i) in bucket.iter().enumerate() {
            for &j in &bucket[x + 1..] {
                if jaccard_sets(&tokens[i], &tokens[j]) >= threshold {
                    uf.union(i, j);
                }
            }
        }
    }

    let mut order: Vec<usize> = Vec::new();
    let mut members: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..chunks.len() {
        let root = uf.find(i);
        members
            .entry(root)
            .or_insert_with(|| {
                order.push(root);
                Vec::new()
            })
            .push(i);
    }

    Ok(order
        .into_iter()
        .map(|root| {
            let idx = &members[&root];
            let rep = *idx
                .iter()
                .min_by_key(|&&i| (chunks[i].ordinal, i))
                .expect("groups are nonempty");
            ChunkGroup {
                group_id: chunks[rep].chunk_id.clone(),
                members: idx.iter().map(|&i| chunks[i].chunk_id.clone()).collect(),
                representative: chunks[rep].clone(),
            }
        })
        .collect())
}

/// Every chunk as its own group.
pub fn singleton_groups(chunks: &[Chunk]) -> Vec<ChunkGroup> {
    chunks
        .iter()
        .map(|c| ChunkGroup {
            group_id: c.chunk_id.clone(),
            members: vec![c.chunk_id.clone()],
            representative: c.clone(),
        })
        .collect()
}

/// chunk_id -> group_id for every member of every group.
pub fn group_lookup(groups: &[ChunkGroup]) -> HashMap<String, String> {
    groups
        .iter()
        .flat_map(|g| g.members.iter().map(move |m| (m.clone(), g.group_id.clone())))
        .collect()
}

/// Read a JSON Lines corpus (`{"doc_id", "title", "body"}` per line).
pub fn read_documents_jsonl(path: &Path) -> Result<Vec<Document>> {
    let file = std::fs::File::open(path).map_err(|e| Error::load(path, e))?;
    let mut docs = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::load(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line)
            .map_err(|e| Error::load(path, format!("line {}: {e}", lineno + 1)))?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_chunks_jsonl<W: Write>(mut out: W, chunks: &[Chunk]) -> Result<()> {
    for chunk in chunks {
        serde_json::to_writer(&mut out, chunk).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, body: &str) -> Document {
        Document {
            doc_id: id.into(),
            title: format!("Title {id}"),
            body: body.into(),
        }
    }

    #[test]
    fn two_paragraphs_make_two_chunks() {
        let docs = [doc("d", "First paragraph here.\n\nSecond one.")];
        let out = split_corpus(&docs, &ChunkingPolicy::paragraph()).unwrap();
        assert_eq!(out.chunks.len(), 2);
        assert_eq!(out.chunks[0].ordinal, 0);
        assert_eq!(out.chunks[1].ordinal, 1);
        assert_eq!(out.chunks[1].text, "Second one.");
    }

    #[test]
    fn nine_sentences_in_blocks_of_four() {
        let body = (1..=9)
            .map(|i| format!("Sentence number {i} is here."))
            .collect::<Vec<_>>()
            .join(" ");
        let out = split_corpus(&[doc("d", &body)], &ChunkingPolicy::sentence_blocks(4)).unwrap();
        let counts: Vec<usize> = out
            .chunks
            .iter()
            .map(|c| sentence_spans(&c.text).len())
            .collect();
        assert_eq!(counts, vec![4, 4, 1]);
    }

    #[test]
    fn empty_corpus_is_invalid() {
        assert!(matches!(
            split_corpus(&[], &ChunkingPolicy::paragraph()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn zero_block_size_is_invalid() {
        let err = split_corpus(&[doc("d", "A.")], &ChunkingPolicy::sentence_blocks(0));
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn blank_document_is_skipped_not_fatal() {
        let docs = [doc("a", "Real text."), doc("b", "  \n\n ")];
        let out = split_corpus(&docs, &ChunkingPolicy::sentence_blocks(2)).unwrap();
        assert_eq!(out.chunks.len(), 1);
        assert_eq!(out.skipped_docs, vec!["b".to_string()]);
    }

    #[test]
    fn abbreviations_do_not_end_sentences() {
        let text = "Dr. Smith met Mr. J. Jones in the U.S. Army. They talked! Did it rain? \"Yes,\" she said.";
        let spans = sentence_spans(text);
        let sentences: Vec<&str> = spans.iter().map(|&(s, e)| &text[s..e]).collect();
        assert_eq!(
            sentences,
            vec![
                "Dr. Smith met Mr. J. Jones in the U.S. Army.",
                "They talked!",
                "Did it rain?",
                "\"Yes,\" she said."
            ]
        );
    }

    #[test]
    fn lowercase_continuation_is_not_a_boundary() {
        assert_eq!(sentence_spans("Version 2.5 is out. it works.").len(), 1);
    }

    #[test]
    fn uk_variants_merge_at_default_threshold() {
        let base = "The single was released in September 1977 and peaked at number twenty four in the {} while becoming one of the most celebrated songs in the catalogue of the artist after his death in January of that later year with many covers recorded by other famous musicians";
        let a = base.replace("{}", "UK");
        let b = base.replace("{}", "United Kingdom");
        assert!(token_jaccard(&a, &b) >= DEFAULT_MERGE_THRESHOLD);
    }

    #[test]
    fn threshold_out_of_range_rejected() {
        assert!(merge_similar_chunks(&[], 1.5, MergeScope::WithinTitle).is_err());
    }

    #[test]
    fn chunk_ids_ignore_whitespace_layout() {
        assert_eq!(chunk_id("d", 0, "a  b\nc"), chunk_id("d", 0, "a b c"));
        assert_ne!(chunk_id("d", 0, "a b c"), chunk_id("d", 1, "a b c"));
    }
}
