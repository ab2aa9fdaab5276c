//! Per-chunk question generation.
//!
//! A [`GeneratorBackend`] turns a rendered prompt into raw completion text;
//! [`parse_qa_lines`] reads the `Question? Answer` line format back out.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;
use std::thread;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_whitespace, Chunk};
use crate::error::{BackendError, Error, Result};
use crate::http::HttpEndpoint;

pub const CHUNK_PLACEHOLDER: &str = "{chunk_text}";
pub const COUNT_PLACEHOLDER: &str = "{num_questions}";

/// Directive prepended to templates without their own `{num_questions}` slot.
pub const EXACT_COUNT_DIRECTIVE: &str =
    "Generate exactly {num_questions} questions to properly capture all the important parts of the text.";

const NQ_SQUAD_BASIC: &str = "Generate numerous questions to properly capture all the important parts of the text. Separate each question-answer pair by a new line only; do not use bullets. Format each question-answer pair on a single line as 'Question? Answer' without any additional separators or spaces around the question mark. Text:{chunk_text}";

const NQ_SQUAD_COMPLEX: &str = "Read the following text and generate numerous factual question-answer pairs designed to resemble authentic user search queries and natural language variations. Each question should accurately and semantically capture important aspects of the text, with varying lengths and complexities that mirror real-world search patterns. Include both shorter, keyword-focused questions such as 'who founded Tesla Motors' and longer, natural style questions like 'when did Elon Musk first start Tesla company'. Incorporate 'how' and 'why' questions to reflect genuine user curiosity. Avoid using phrases like 'according to the text' and abstain from pronouns by specifying names or entities. Ensure questions are not overly formal or artificial, maintaining a natural query style. Immediately follow each question with its precise answer on the same line, formatted as 'Question? Answer', without any additional formatting or commentary. Each pair should be on its own line. Text:{chunk_text}";

const MULTIHOP_BASIC: &str = "Generate enough multi-hop questions along with their answers to properly capture all the important parts of the text. These questions should require integrating multiple pieces of information to answer. Separate each question-answer pair by a new line only; do not use bullets. Format each question-answer pair on a single line as 'Question? Answer' without any additional separators or spaces around the question mark. Text:{chunk_text}";

const MULTIHOP_COMPLEX: &str = "Read the following text and generate complex, multi-hop questions that require integrating multiple pieces of information from the text to answer. The questions should involve reasoning and synthesis, referring to different parts or aspects of the text. Do not use phrases like 'according to the text', 'mentioned in the text', or 'in the text'. All questions should be one sentence long. Never use pronouns in questions; instead, use the actual names or entities. Format each question on a single new line as Question? Answer without any additional separators or spaces around the question mark. Text:{chunk_text}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateName {
    NqSquadBasic,
    NqSquadComplex,
    MultihopBasic,
    MultihopComplex,
}

impl TemplateName {
    pub const ALL: [TemplateName; 4] = [
        TemplateName::NqSquadBasic,
        TemplateName::NqSquadComplex,
        TemplateName::MultihopBasic,
        TemplateName::MultihopComplex,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateName::NqSquadBasic => "nq_squad_basic",
            TemplateName::NqSquadComplex => "nq_squad_complex",
            TemplateName::MultihopBasic => "multihop_basic",
            TemplateName::MultihopComplex => "multihop_complex",
        }
    }

    pub fn builtin_body(self) -> &'static str {
        match self {
            TemplateName::NqSquadBasic => NQ_SQUAD_BASIC,
            TemplateName::NqSquadComplex => NQ_SQUAD_COMPLEX,
            TemplateName::MultihopBasic => MULTIHOP_BASIC,
            TemplateName::MultihopComplex => MULTIHOP_COMPLEX,
        }
    }
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TemplateName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TemplateName::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown template {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: TemplateName,
    pub body: String,
}

impl PromptTemplate {
    pub fn builtin(name: TemplateName) -> Self {
        Self {
            name,
            body: name.builtin_body().to_string(),
        }
    }

    /// A template with a caller-supplied body, validated on construction.
    pub fn custom(name: TemplateName, body: impl Into<String>) -> Result<Self> {
        let template = Self {
            name,
            body: body.into(),
        };
        template.validate()?;
        Ok(template)
    }

    pub fn validate(&self) -> Result<()> {
        match self.body.matches(CHUNK_PLACEHOLDER).count() {
            1 => Ok(()),
            0 => Err(Error::Template(format!(
                "template {} is missing {CHUNK_PLACEHOLDER}",
                self.name
            ))),
            n => Err(Error::Template(format!(
                "template {} contains {CHUNK_PLACEHOLDER} {n} times",
                self.name
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum QuestionBudget {
    Fixed { count: usize },
    LlmDecides,
}

impl QuestionBudget {
    pub fn fixed(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidInput("fixed question count must be >= 1".into()));
        }
        Ok(QuestionBudget::Fixed { count })
    }

    pub fn describe(&self) -> String {
        match self {
            QuestionBudget::Fixed { count } => format!("fixed:{count}"),
            QuestionBudget::LlmDecides => "llm_decides".into(),
        }
    }
}

impl std::str::FromStr for QuestionBudget {
    type Err = Error;

    /// `auto` / `llm_decides`, or a positive integer.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" | "llm_decides" => Ok(QuestionBudget::LlmDecides),
            n => n
                .parse::<usize>()
                .map_err(|_| Error::InvalidInput(format!("invalid question budget {s:?}")))
                .and_then(QuestionBudget::fixed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedQA {
    pub question: String,
    pub answer: String,
    pub chunk_id: String,
}

/// Substitute the chunk text (and, in fixed mode, the question count) into
/// a template. Templates without a `{num_questions}` slot get
/// [`EXACT_COUNT_DIRECTIVE`] prepended in fixed mode; in LLM-decides mode
/// the template text is used unchanged.
pub fn render_prompt(
    template: &PromptTemplate,
    chunk: &Chunk,
    budget: &QuestionBudget,
) -> Result<String> {
    template.validate()?;
    let has_count_slot = template.body.contains(COUNT_PLACEHOLDER);
    let with_count = match (budget, has_count_slot) {
        (QuestionBudget::Fixed { count }, true) => {
            template.body.replace(COUNT_PLACEHOLDER, &count.to_string())
        }
        (QuestionBudget::Fixed { count }, false) => format!(
            "{} {}",
            EXACT_COUNT_DIRECTIVE.replace(COUNT_PLACEHOLDER, &count.to_string()),
            template.body
        ),
        (QuestionBudget::LlmDecides, true) => {
            return Err(Error::Template(format!(
                "template {} has a {COUNT_PLACEHOLDER} slot but the budget is llm_decides",
                template.name
            )))
        }
        (QuestionBudget::LlmDecides, false) => template.body.clone(),
    };
    Ok(with_count.replacen(CHUNK_PLACEHOLDER, &chunk.text, 1))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedQa {
    pub pairs: Vec<GeneratedQA>,
    pub malformed: usize,
}

fn bullet_prefix() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(?:[-*\u{2022}]+|\d+[.)])\s*").expect("valid regex"))
}

/// Parse `Question? Answer` lines, splitting each at its first `?`.
/// Blank lines are ignored; lines without a usable question are counted
/// as malformed.
pub fn parse_qa_lines(raw: &str, chunk_id: &str) -> ParsedQa {
    let mut parsed = ParsedQa::default();
    for line in raw.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let line = bullet_prefix().replace(line, "");
        let Some(pos) = line.find('?') else {
            parsed.malformed += 1;
            continue;
        };
        let question = line[..=pos].trim();
        if question.len() <= 1 {
            parsed.malformed += 1;
            continue;
        }
        parsed.pairs.push(GeneratedQA {
            question: question.to_string(),
            answer: line[pos + 1..].trim().to_string(),
            chunk_id: chunk_id.to_string(),
        });
    }
    parsed
}

/// Inverse of [`parse_qa_lines`] for well-formed pairs.
pub fn format_qa_lines(pairs: &[GeneratedQA]) -> String {
    pairs
        .iter()
        .map(|qa| {
            if qa.answer.is_empty() {
                qa.question.clone()
            } else {
                format!("{} {}", qa.question, qa.answer)
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Text-generation backend. Implementations are shared across worker
/// threads.
pub trait GeneratorBackend: Send + Sync {
    fn identity(&self) -> &str;
    fn generate(&self, prompt: &str) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Additional attempts after the first one.
    pub retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            retries: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            retries: 0,
            base_delay: Duration::ZERO,
        }
    }

    /// Run `op` until it succeeds, fails with a non-retryable error, or the
    /// attempts run out. Backoff doubles after each failure.
    pub fn run<T>(
        &self,
        mut op: impl FnMut() -> Result<T, BackendError>,
    ) -> Result<T, BackendError> {
        let mut delay = self.base_delay;
        let mut attempt = 0;
        loop {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && attempt < self.retries => {
                    log::debug!("attempt {} failed: {e}; retrying", attempt + 1);
                    if !delay.is_zero() {
                        thread::sleep(delay);
                    }
                    delay *= 2;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenerationOutcome {
    pub pairs: Vec<GeneratedQA>,
    pub malformed: usize,
    pub prompt: String,
    pub completion: String,
    /// `(requested, parsed)` when a fixed budget was not met exactly.
    pub count_deviation: Option<(usize, usize)>,
}

pub fn generate_questions(
    chunk: &Chunk,
    backend: &dyn GeneratorBackend,
    template: &PromptTemplate,
    budget: &QuestionBudget,
    retry: &RetryPolicy,
) -> Result<GenerationOutcome> {
    let prompt = render_prompt(template, chunk, budget)?;
    let completion = retry
        .run(|| backend.generate(&prompt))
        .map_err(|e| Error::Generation {
            chunk_id: chunk.chunk_id.clone(),
            message: e.to_string(),
        })?;
    let ParsedQa { pairs, malformed } = parse_qa_lines(&completion, &chunk.chunk_id);
    let count_deviation = match budget {
        QuestionBudget::Fixed { count } if *count != pairs.len() => {
            log::info!(
                "chunk {}: requested {count} questions, parsed {}",
                chunk.chunk_id,
                pairs.len()
            );
            Some((*count, pairs.len()))
        }
        _ => None,
    };
    if pairs.is_empty() {
        log::warn!("chunk {}: no questions parsed", chunk.chunk_id);
    }
    Ok(GenerationOutcome {
        pairs,
        malformed,
        prompt,
        completion,
        count_deviation,
    })
}

/// Marker after which every built-in template places the chunk text.
const TEXT_MARKER: &str = "Text:";

fn exact_count(prompt: &str) -> Option<usize> {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"exactly (\d+) questions").expect("valid regex"))
        .captures(prompt)
        .and_then(|c| c[1].parse().ok())
}

/// Deterministic offline generator.
///
/// For question prompts (anything containing `Text:`) it emits
/// `Question? Answer` lines built from the chunk's words: the count follows
/// an "exactly N questions" directive when present, else `default_count`.
/// Questions registered with [`MockGenerator::with_planted_questions`] for a
/// chunk text are emitted first. Any other prompt is treated as a
/// hypothetical-document request and answered with a short passage echoing
/// the prompt.
#[derive(Debug, Clone)]
pub struct MockGenerator {
    identity: String,
    default_count: usize,
    delay: Duration,
    planted: HashMap<String, Vec<String>>,
}

impl Default for MockGenerator {
    fn default() -> Self {
        Self::new(3)
    }
}

impl MockGenerator {
    pub fn new(default_count: usize) -> Self {
        Self {
            identity: "mock-generator".into(),
            default_count: default_count.max(1),
            delay: Duration::ZERO,
            planted: HashMap::new(),
        }
    }

    /// Sleep this long on every call, to model remote latency.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    pub fn with_identity(mut self, identity: impl Into<String>) -> Self {
        self.identity = identity.into();
        self
    }

    /// Emit `questions` verbatim for any chunk whose normalized text equals
    /// `chunk_text`.
    pub fn with_planted_questions(
        mut self,
        chunk_text: &str,
        questions: impl IntoIterator<Item = String>,
    ) -> Self {
        self.planted
            .entry(normalize_whitespace(chunk_text))
            .or_default()
            .extend(questions);
        self
    }

    fn questions_for(&self, text: &str, count: usize) -> Vec<String> {
        let mut lines: Vec<String> = self
            .planted
            .get(&normalize_whitespace(text))
            .map(|qs| {
                qs.iter()
                    .map(|q| {
                        let q = q.trim().trim_end_matches('?');
                        format!("{q}? planted")
                    })
                    .collect()
            })
            .unwrap_or_default();

        let words: Vec<String> = text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| w.chars().count() > 3)
            .map(str::to_lowercase)
            .collect();
        let first_sentence = text
            .split_terminator(['.', '!', '?'])
            .next()
            .unwrap_or(text)
            .trim()
            .replace('?', "");
        let mut i = 0;
        while lines.len() < count {
            let topic = if words.is_empty() {
                format!("item {i}")
            } else {
                let a = &words[i % words.len()];
                let b = &words[(i * 7 + 3) % words.len()];
                format!("{a} and {b}")
            };
            lines.push(format!("What does the passage say about {topic}? {first_sentence}"));
            i += 1;
        }
        lines
    }
}

impl GeneratorBackend for MockGenerator {
    fn identity(&self) -> &str {
        &self.identity
    }

    fn generate(&self, prompt: &str) -> Result<String, BackendError> {
        if !self.delay.is_zero() {
            thread::sleep(self.delay);
        }
        match prompt.rfind(TEXT_MARKER) {
            Some(pos) => {
                let text = &prompt[pos + TEXT_MARKER.len()..];
                let count = exact_count(prompt).unwrap_or(self.default_count);
                Ok(self.questions_for(text, count).join("\n"))
            }
            None => {
                let subject = prompt.rsplit(':').next().unwrap_or(prompt).trim();
                Ok(format!(
                    "{subject} This passage describes {subject} in encyclopedic terms."
                ))
            }
        }
    }
}

/// Adapter turning a closure into a backend.
pub struct FnGenerator<F> {
    identity: String,
    f: F,
}

impl<F> FnGenerator<F>
where
    F: Fn(&str) -> Result<String, BackendError> + Send + Sync,
{
    pub fn new(identity: impl Into<String>, f: F) -> Self {
        Self {
            identity: identity.into(),
            f,
        }
    }
}

impl<F> GeneratorBackend for FnGenerator<F>
where
    F: Fn(&str) -> Result<String, BackendError> + Send + Sync,
{
    fn identity(&self) -> &str {
        &self.identity
    }

    fn generate(&self, prompt: &str) -> Result<String, BackendError> {
        (self.f)(prompt)
    }
}

/// Chat-completions generator for any OpenAI-compatible server.
pub struct ChatCompletionsGenerator {
    endpoint: HttpEndpoint,
    identity: String,
    temperature: f64,
}

impl ChatCompletionsGenerator {
    pub fn new(endpoint: HttpEndpoint, temperature: f64) -> Self {
        Self {
            identity: endpoint.model.clone(),
            endpoint,
            temperature,
        }
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: Option<String>,
}

pub(crate) fn chat_request_body(model: &str, prompt: &str, temperature: f64) -> serde_json::Value {
    serde_json::json!({
        "model": model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": temperature,
    })
}

pub(crate) fn parse_chat_response(body: &str) -> Result<String, BackendError> {
    let parsed: ChatResponse = serde_json::from_str(body)
        .map_err(|e| BackendError::Protocol(format!("bad chat response: {e}")))?;
    parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| BackendError::Protocol("chat response has no content".into()))
}

impl GeneratorBackend for ChatCompletionsGenerator {
    fn identity(&self) -> &str {
        &self.identity
    }

    fn generate(&self, prompt: &str) -> Result<String, BackendError> {
        let body = chat_request_body(&self.endpoint.model, prompt, self.temperature);
        let text = self.endpoint.post_json("chat/completions", &body)?;
        parse_chat_response(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn chunk(text: &str) -> Chunk {
        Chunk {
            chunk_id: "c1".into(),
            doc_id: "d".into(),
            title: "T".into(),
            ordinal: 0,
            text: text.into(),
        }
    }

    #[test]
    fn basic_llm_decides_starts_with_template_text() {
        let t = PromptTemplate::builtin(TemplateName::NqSquadBasic);
        let p = render_prompt(&t, &chunk("Paris is the capital of France."), &QuestionBudget::LlmDecides)
            .unwrap();
        assert!(p.starts_with(
            "Generate numerous questions to properly capture all the important parts of the text."
        ));
        assert!(p.ends_with("Text:Paris is the capital of France."));
    }

    #[test]
    fn fixed_count_is_substituted() {
        for name in TemplateName::ALL {
            let p = render_prompt(
                &PromptTemplate::builtin(name),
                &chunk("X"),
                &QuestionBudget::Fixed { count: 10 },
            )
            .unwrap();
            assert!(p.contains("exactly 10 questions"), "{name}");
        }
    }

    #[test]
    fn count_slot_in_custom_template() {
        let t = PromptTemplate::custom(
            TemplateName::NqSquadBasic,
            "Write {num_questions} questions. Text:{chunk_text}",
        )
        .unwrap();
        let p = render_prompt(&t, &chunk("abc"), &QuestionBudget::Fixed { count: 4 }).unwrap();
        assert_eq!(p, "Write 4 questions. Text:abc");
        assert!(render_prompt(&t, &chunk("abc"), &QuestionBudget::LlmDecides).is_err());
    }

    #[test]
    fn missing_placeholder_is_template_error() {
        let t = PromptTemplate {
            name: TemplateName::NqSquadBasic,
            body: "no slot".into(),
        };
        assert!(matches!(
            render_prompt(&t, &chunk("x"), &QuestionBudget::LlmDecides),
            Err(Error::Template(_))
        ));
        assert!(PromptTemplate::custom(TemplateName::NqSquadBasic, "{chunk_text}{chunk_text}").is_err());
    }

    #[test]
    fn chunk_text_containing_placeholders_is_inserted_literally() {
        let t = PromptTemplate::builtin(TemplateName::MultihopBasic);
        let p = render_prompt(&t, &chunk("{num_questions} {chunk_text}"), &QuestionBudget::Fixed { count: 2 })
            .unwrap();
        assert!(p.ends_with("Text:{num_questions} {chunk_text}"));
    }

    #[test]
    fn parses_two_pairs() {
        let parsed = parse_qa_lines("Who founded Tesla? Elon Musk\nWhen? 2003", "c");
        let got: Vec<(&str, &str)> = parsed
            .pairs
            .iter()
            .map(|qa| (qa.question.as_str(), qa.answer.as_str()))
            .collect();
        assert_eq!(got, vec![("Who founded Tesla?", "Elon Musk"), ("When?", "2003")]);
        assert_eq!(parsed.malformed, 0);
    }

    #[test]
    fn line_without_question_mark_is_malformed() {
        let parsed = parse_qa_lines("This line has no question mark", "c");
        assert!(parsed.pairs.is_empty());
        assert_eq!(parsed.malformed, 1);
    }

    #[test]
    fn bullets_and_numbering_are_stripped() {
        let parsed = parse_qa_lines("1. A? x\n2) B? y\n- C? z\n* D?\n\u{2022} E? w\n? orphan", "c");
        let qs: Vec<&str> = parsed.pairs.iter().map(|q| q.question.as_str()).collect();
        assert_eq!(qs, vec!["A?", "B?", "C?", "D?", "E?"]);
        assert_eq!(parsed.malformed, 1);
    }

    #[test]
    fn budget_parsing() {
        assert_eq!("auto".parse::<QuestionBudget>().unwrap(), QuestionBudget::LlmDecides);
        assert_eq!("7".parse::<QuestionBudget>().unwrap(), QuestionBudget::Fixed { count: 7 });
        assert!("0".parse::<QuestionBudget>().is_err());
        assert!(QuestionBudget::fixed(0).is_err());
    }

    #[test]
    fn echo_backend_yields_one_question() {
        let c = chunk("text");
        let id = c.chunk_id.clone();
        let backend = FnGenerator::new("echo", move |_| Ok(format!("Q about {id}? A")));
        let out = generate_questions(
            &c,
            &backend,
            &PromptTemplate::builtin(TemplateName::NqSquadBasic),
            &QuestionBudget::LlmDecides,
            &RetryPolicy::none(),
        )
        .unwrap();
        assert_eq!(out.pairs.len(), 1);
        assert_eq!(out.pairs[0].question, "Q about c1?");
        assert_eq!(out.pairs[0].chunk_id, "c1");
    }

    #[test]
    fn mock_follows_fixed_budget() {
        let out = generate_questions(
            &chunk("Alpha beta gamma delta epsilon. Second sentence here."),
            &MockGenerator::new(2),
            &PromptTemplate::builtin(TemplateName::NqSquadComplex),
            &QuestionBudget::Fixed { count: 5 },
            &RetryPolicy::none(),
        )
        .unwrap();
        assert_eq!(out.pairs.len(), 5);
        assert_eq!(out.malformed, 0);
        assert!(out.count_deviation.is_none());
    }

    #[test]
    fn count_deviation_is_recorded_not_fatal() {
        let backend = FnGenerator::new("short", |_| Ok("Only one? yes".into()));
        let out = generate_questions(
            &chunk("t"),
            &backend,
            &PromptTemplate::builtin(TemplateName::NqSquadBasic),
            &QuestionBudget::Fixed { count: 3 },
            &RetryPolicy::none(),
        )
        .unwrap();
        assert_eq!(out.count_deviation, Some((3, 1)));
    }

    #[test]
    fn transport_errors_are_retried_then_surface_chunk_id() {
        let calls = AtomicUsize::new(0);
        let backend = FnGenerator::new("flaky", |_| {
            calls.fetch_add(1, Ordering::SeqCst);
            Err(BackendError::Transport("down".into()))
        });
        let retry = RetryPolicy {
            retries: 2,
            base_delay: Duration::ZERO,
        };
        let err = generate_questions(
            &chunk("t"),
            &backend,
            &PromptTemplate::builtin(TemplateName::NqSquadBasic),
            &QuestionBudget::LlmDecides,
            &retry,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Generation { ref chunk_id, .. } if chunk_id == "c1"));
        assert_eq!(calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn protocol_errors_are_not_retried() {
        let calls = AtomicUsize::new(0);
        let backend = FnGenerator::new("bad", |_| {
            calls.fetch_add(1, Ordering::SeqCst);
            Err(BackendError::Protocol("nope".into()))
        });
        let _ = RetryPolicy::default().run(|| backend.generate("x"));
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn recovers_after_transient_failure() {
        let calls = AtomicUsize::new(0);
        let out = RetryPolicy { retries: 3, base_delay: Duration::ZERO }.run(|| {
            if calls.fetch_add(1, Ordering::SeqCst) < 2 {
                Err(BackendError::Transport("blip".into()))
            } else {
                Ok(7)
            }
        });
        assert_eq!(out.unwrap(), 7);
    }

    #[test]
    fn planted_questions_come_first() {
        let text = "Some chunk body with words.";
        let mock = MockGenerator::new(2).with_planted_questions(text, ["Who wrote it?".to_string()]);
        let prompt = render_prompt(
            &PromptTemplate::builtin(TemplateName::NqSquadBasic),
            &chunk(text),
            &QuestionBudget::LlmDecides,
        )
        .unwrap();
        let parsed = parse_qa_lines(&mock.generate(&prompt).unwrap(), "c");
        assert_eq!(parsed.pairs[0].question, "Who wrote it?");
        assert_eq!(parsed.pairs.len(), 2);
    }

    #[test]
    fn chat_response_parsing() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"Q? A"}}]}"#;
        assert_eq!(parse_chat_response(body).unwrap(), "Q? A");
        assert!(parse_chat_response(r#"{"choices":[]}"#).is_err());
        let req = chat_request_body("m", "hi", 0.0);
        assert_eq!(req["messages"][0]["content"], "hi");
        assert_eq!(req["temperature"], 0.0);
    }
}
