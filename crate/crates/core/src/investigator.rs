//! Question answering over the paper and the web: chunk, embed, retrieve the
//! most similar chunks, then ask the QA model.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{
    cosine, search, BackendError, Blocklist, ChatRequest, DocumentFetcher, Embedder, EmbeddingVector,
    FetchedDocument, ContentKind, LlmClient, WebSearch,
};
use crate::prompts::PromptSet;
use crate::text::fold_quotes;

/// The exact reply the QA prompt asks for when the context is insufficient.
pub const REFUSAL: &str = "I don't know";

#[derive(Debug, thiserror::Error)]
pub enum InvestigatorError {
    #[error("document `{0}` is empty")]
    EmptyDocument(String),
    #[error("chunk size {chunk} must exceed overlap {overlap}")]
    InvalidChunking { chunk: usize, overlap: usize },
    #[error("no chunks to answer from")]
    NoChunks,
    #[error("web search is not configured")]
    NoSearchBackend,
    #[error("corpus: {0}")]
    Corpus(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] crate::prompts::PromptError),
}

/// Retrieval settings. Chunk size, overlap and web caps are our defaults; the
/// Retrieval defaults: 1000-char windows, 100 overlap, top 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrievalParams {
    pub chunk_chars: usize,
    pub overlap_chars: usize,
    pub top_k: usize,
    pub max_web_hits: usize,
    pub max_doc_bytes: usize,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        RetrievalParams { chunk_chars: 1000, overlap_chars: 100, top_k: 5, max_web_hits: 5, max_doc_bytes: 2 * 1024 * 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentChunk {
    pub doc_id: String,
    pub chunk_index: usize,
    /// Character offset of the chunk in its document.
    pub start: usize,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingVector>,
}

/// Fixed-width character windows. Window `n` starts at `n * (chunk - overlap)`
/// and windows are emitted while the start lies inside the text, so the tail
/// may hold a short window that is already covered by its predecessor.
pub fn chunk_document(
    doc_id: &str,
    text: &str,
    chunk_chars: usize,
    overlap_chars: usize,
) -> Result<Vec<DocumentChunk>, InvestigatorError> {
    if chunk_chars == 0 || chunk_chars <= overlap_chars {
        return Err(InvestigatorError::InvalidChunking { chunk: chunk_chars, overlap: overlap_chars });
    }
    let chars: Vec<char> = text.chars().collect();
    if chars.is_empty() {
        return Err(InvestigatorError::EmptyDocument(doc_id.to_string()));
    }
    let step = chunk_chars - overlap_chars;
    Ok((0..chars.len())
        .step_by(step)
        .enumerate()
        .map(|(chunk_index, start)| {
            let end = (start + chunk_chars).min(chars.len());
            DocumentChunk {
                doc_id: doc_id.to_string(),
                chunk_index,
                start,
                text: chars[start..end].iter().collect(),
                embedding: None,
            }
        })
        .collect())
}

/// Inverse of [`chunk_document`].
pub fn reassemble(chunks: &[DocumentChunk]) -> String {
    let mut out: Vec<char> = Vec::new();
    for chunk in chunks {
        let skip = out.len().saturating_sub(chunk.start);
        out.extend(chunk.text.chars().skip(skip));
    }
    out.into_iter().collect()
}

/// Retrieved chunk with its similarity to the query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub doc_id: String,
    pub chunk_index: usize,
    pub score: f64,
}

/// Positions of the `k` chunks most similar to `query`, best first; ties go
/// to the smaller `(doc_id, chunk_index)`. Chunks without an embedding are
/// skipped.
pub fn top_k_indices(query: &EmbeddingVector, chunks: &[DocumentChunk], k: usize) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = chunks
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.embedding.as_ref().map(|e| (i, cosine(query, e))))
        .collect();
    scored.sort_by(|(i, a), (j, b)| {
        b.total_cmp(a)
            .then_with(|| chunks[*i].doc_id.cmp(&chunks[*j].doc_id))
            .then_with(|| chunks[*i].chunk_index.cmp(&chunks[*j].chunk_index))
    });
    scored.truncate(k);
    scored
}

pub fn top_k_chunks(
    embedder: &dyn Embedder,
    question: &str,
    chunks: &[DocumentChunk],
    k: usize,
) -> Result<Vec<(DocumentChunk, f64)>, InvestigatorError> {
    let q = embedder.embed(question)?;
    Ok(top_k_indices(&q, chunks, k).into_iter().map(|(i, s)| (chunks[i].clone(), s)).collect())
}

/// Embedded chunks of one or more documents.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChunkIndex {
    pub chunks: Vec<DocumentChunk>,
}

impl ChunkIndex {
    /// Chunks every document and embeds the chunks in parallel.
    pub fn build<'a>(
        docs: impl IntoIterator<Item = (&'a str, &'a str)>,
        embedder: &dyn Embedder,
        params: &RetrievalParams,
    ) -> Result<Self, InvestigatorError> {
        let mut chunks = Vec::new();
        for (doc_id, text) in docs {
            chunks.extend(chunk_document(doc_id, text, params.chunk_chars, params.overlap_chars)?);
        }
        let embeddings: Vec<EmbeddingVector> =
            chunks.par_iter().map(|c| embedder.embed(&c.text)).collect::<Result<_, _>>()?;
        for (chunk, e) in chunks.iter_mut().zip(embeddings) {
            chunk.embedding = Some(e);
        }
        Ok(ChunkIndex { chunks })
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Paper,
    Web,
    /// Model knowledge only, no retrieval.
    ClosedBook,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "text")]
pub enum Answer {
    Text(String),
    NoAnswer,
}

impl Answer {
    pub fn text(&self) -> Option<&str> {
        match self {
            Answer::Text(t) => Some(t),
            Answer::NoAnswer => None,
        }
    }

    pub fn is_no_answer(&self) -> bool {
        matches!(self, Answer::NoAnswer)
    }

    /// Maps the refusal sentence (ignoring case, surrounding whitespace and
    /// punctuation) to `NoAnswer`.
    pub fn from_reply(reply: &str) -> Self {
        if is_refusal(reply) {
            Answer::NoAnswer
        } else {
            Answer::Text(reply.trim().to_string())
        }
    }
}

pub fn is_refusal(reply: &str) -> bool {
    let folded = fold_quotes(reply).to_lowercase();
    folded.trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation()) == REFUSAL.to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaPair {
    pub question: String,
    pub answer: Answer,
    pub source: Source,
    pub evidence: Vec<Evidence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    /// Why no answer was attempted, when retrieval came up empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
}

/// The paragraph under review and the QA pairs gathered for it, in
/// execution order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextLog {
    pub paragraph: String,
    pub pairs: Vec<QaPair>,
}

impl ContextLog {
    pub fn new(paragraph: &str) -> Self {
        ContextLog { paragraph: paragraph.to_string(), pairs: Vec::new() }
    }

    pub fn answered(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pairs.iter().filter_map(|p| p.answer.text().map(|a| (p.question.as_str(), a)))
    }
}

#[derive(Debug, Clone, Deserialize)]
struct ManifestEntry {
    path: PathBuf,
    #[serde(default)]
    url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusDocument {
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    pub text: String,
}

/// A directory of plain-text documents listed in `manifest.json` as
/// `{doc_id: {path, url}}`, with paths relative to the directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub documents: Vec<CorpusDocument>,
}

impl Corpus {
    pub const MANIFEST: &'static str = "manifest.json";

    pub fn load_dir(dir: &Path) -> Result<Self, InvestigatorError> {
        let manifest_path = dir.join(Self::MANIFEST);
        let raw = std::fs::read_to_string(&manifest_path)
            .map_err(|e| InvestigatorError::Corpus(format!("{}: {e}", manifest_path.display())))?;
        let manifest: BTreeMap<String, ManifestEntry> = serde_json::from_str(&raw)
            .map_err(|e| InvestigatorError::Corpus(format!("{}: {e}", manifest_path.display())))?;
        let documents = manifest
            .into_iter()
            .map(|(doc_id, entry)| {
                let path = dir.join(&entry.path);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| InvestigatorError::Corpus(format!("{}: {e}", path.display())))?;
                Ok(CorpusDocument { doc_id, url: entry.url, text })
            })
            .collect::<Result<_, InvestigatorError>>()?;
        Ok(Corpus { documents })
    }

    pub fn single(doc_id: &str, text: &str) -> Self {
        Corpus { documents: vec![CorpusDocument { doc_id: doc_id.into(), url: None, text: text.into() }] }
    }

    pub fn index(&self, embedder: &dyn Embedder, params: &RetrievalParams) -> Result<ChunkIndex, InvestigatorError> {
        ChunkIndex::build(self.documents.iter().map(|d| (d.doc_id.as_str(), d.text.as_str())), embedder, params)
    }
}

/// Serves documents from a [`Corpus`] by URL, for offline web retrieval.
#[derive(Debug, Clone, Default)]
pub struct FixtureFetcher {
    by_url: BTreeMap<String, String>,
}

impl FixtureFetcher {
    pub fn new(corpus: &Corpus) -> Self {
        let by_url =
            corpus.documents.iter().filter_map(|d| d.url.clone().map(|u| (u, d.text.clone()))).collect();
        FixtureFetcher { by_url }
    }

    pub fn with_page(mut self, url: &str, text: &str) -> Self {
        self.by_url.insert(url.into(), text.into());
        self
    }
}

impl DocumentFetcher for FixtureFetcher {
    fn fetch(&self, url: &str) -> Result<FetchedDocument, BackendError> {
        self.by_url
            .get(url)
            .map(|text| FetchedDocument { url: url.into(), kind: ContentKind::Text, text: text.clone() })
            .ok_or_else(|| BackendError::Unavailable(format!("no fixture document for {url}")))
    }
}

fn truncate_bytes(text: &str, max: usize) -> &str {
    if text.len() <= max {
        return text;
    }
    let mut end = max;
    while !text.is_char_boundary(end) {
        end -= 1;
    }
    &text[..end]
}

/// Runs the QA model over retrieved evidence.
#[derive(Clone)]
pub struct Investigator {
    pub llm: LlmClient,
    pub embedder: Arc<dyn Embedder>,
    pub search: Option<Arc<dyn WebSearch>>,
    pub fetcher: Option<Arc<dyn DocumentFetcher>>,
    pub blocklist: Blocklist,
    pub params: RetrievalParams,
    pub prompts: Arc<PromptSet>,
}

impl std::fmt::Debug for Investigator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Investigator")
            .field("params", &self.params)
            .field("blocklist", &self.blocklist)
            .field("web", &self.search.is_some())
            .finish_non_exhaustive()
    }
}

impl Investigator {
    pub fn new(llm: LlmClient, embedder: Arc<dyn Embedder>) -> Self {
        Investigator {
            llm,
            embedder,
            search: None,
            fetcher: None,
            blocklist: Blocklist::default(),
            params: RetrievalParams::default(),
            prompts: Arc::new(PromptSet::builtin()),
        }
    }

    pub fn with_web(mut self, search: Arc<dyn WebSearch>, fetcher: Arc<dyn DocumentFetcher>) -> Self {
        self.search = Some(search);
        self.fetcher = Some(fetcher);
        self
    }

    pub fn with_blocklist(mut self, blocklist: Blocklist) -> Self {
        self.blocklist = blocklist;
        self
    }

    pub fn with_params(mut self, params: RetrievalParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_prompts(mut self, prompts: Arc<PromptSet>) -> Self {
        self.prompts = prompts;
        self
    }

    /// Asks the QA model with the given chunks as context. Returns the
    /// answer only; callers attach source and evidence.
    pub fn answer_from_context(&self, question: &str, chunks: &[&DocumentChunk]) -> Result<Answer, InvestigatorError> {
        if chunks.is_empty() {
            return Err(InvestigatorError::NoChunks);
        }
        let context = chunks.iter().map(|c| c.text.as_str()).collect::<Vec<_>>().join("\n\n");
        let user = self.prompts.qa_user.render(&[("context", &context), ("question", question)])?;
        let reply = self.llm.generate(&ChatRequest::new("qa", "", user))?;
        Ok(Answer::from_reply(&reply))
    }

    fn answer_from_index(&self, question: &str, index: &ChunkIndex, source: Source) -> Result<QaPair, InvestigatorError> {
        let q = self.embedder.embed(question)?;
        let top = top_k_indices(&q, &index.chunks, self.params.top_k);
        let evidence: Vec<Evidence> = top
            .iter()
            .map(|(i, s)| Evidence { doc_id: index.chunks[*i].doc_id.clone(), chunk_index: index.chunks[*i].chunk_index, score: *s })
            .collect();
        let chunks: Vec<&DocumentChunk> = top.iter().map(|(i, _)| &index.chunks[*i]).collect();
        let answer = self.answer_from_context(question, &chunks)?;
        Ok(QaPair { question: question.into(), answer, source, evidence, url: None, cause: None })
    }

    pub fn answer_from_paper(&self, question: &str, paper: &ChunkIndex) -> Result<QaPair, InvestigatorError> {
        self.answer_from_index(question, paper, Source::Paper)
    }

    /// Searches, fetches up to `max_web_hits` allowed hits (skipping failed
    /// fetches), and answers from the fetched pages.
    pub fn answer_from_web(&self, question: &str) -> Result<QaPair, InvestigatorError> {
        let (Some(engine), Some(fetcher)) = (&self.search, &self.fetcher) else {
            return Err(InvestigatorError::NoSearchBackend);
        };
        let no_answer = |cause: String| {
            tracing::info!(question, %cause, "web step produced no answer");
            QaPair {
                question: question.into(),
                answer: Answer::NoAnswer,
                source: Source::Web,
                evidence: Vec::new(),
                url: None,
                cause: Some(cause),
            }
        };
        let hits = search(engine.as_ref(), question, &self.blocklist)?;
        if hits.is_empty() {
            return Ok(no_answer("no search results after blocklist filtering".into()));
        }
        let mut docs = Vec::new();
        for hit in hits.iter().take(self.params.max_web_hits) {
            match fetcher.fetch(&hit.url) {
                Ok(doc) if !doc.text.trim().is_empty() && self.blocklist.allows(&doc.url) => {
                    docs.push((hit.url.clone(), truncate_bytes(&doc.text, self.params.max_doc_bytes).to_string()));
                }
                Ok(_) => tracing::debug!(url = %hit.url, "skipping empty or blocked document"),
                Err(err) => tracing::warn!(url = %hit.url, error = %err, "fetch failed, trying next hit"),
            }
        }
        if docs.is_empty() {
            return Ok(no_answer("every search hit failed to fetch".into()));
        }
        let index = ChunkIndex::build(docs.iter().map(|(u, t)| (u.as_str(), t.as_str())), self.embedder.as_ref(), &self.params)?;
        let mut pair = self.answer_from_index(question, &index, Source::Web)?;
        pair.url = pair.evidence.first().map(|e| e.doc_id.clone());
        Ok(pair)
    }

    /// Answers from model knowledge alone.
    pub fn answer_closed_book(&self, question: &str) -> Result<QaPair, InvestigatorError> {
        let user = self.prompts.closed_book_qa_user.render(&[("question", question)])?;
        let reply = self.llm.generate(&ChatRequest::new("qa_closed_book", "", user))?;
        Ok(QaPair {
            question: question.into(),
            answer: Answer::from_reply(&reply),
            source: Source::ClosedBook,
            evidence: Vec::new(),
            url: None,
            cause: None,
        })
    }
}
