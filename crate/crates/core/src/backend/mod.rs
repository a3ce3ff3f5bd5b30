//! Generative-model, embedding, web-search and document-fetch backends.
//!
//! Every external service sits behind a small trait so that the whole
//! pipeline can run offline against scripted fixtures. [`LlmClient`] wraps a
//! [`ChatBackend`] with retries, a per-run budget and a trace log.

mod embed;
mod fetch;
mod http;
mod mock;
mod search;
mod trace;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use embed::{cosine, Embedder, EmbeddingVector, HashEmbedder};
pub use fetch::{
    html_to_text, CommandPdfExtractor, ContentKind, DocumentFetcher, FetchedDocument, HttpFetcher,
    PdfTextExtractor,
};
pub use http::{HttpChat, HttpEmbedder, HttpEndpoint};
pub use mock::{MockChat, MockRule, MockScript};
pub use search::{
    search, Blocklist, FixtureSearch, GoogleSearch, SearchHit, SearchRule, WebSearch,
    DEFAULT_BLOCKLIST,
};
pub use trace::{TraceLog, TraceOutcome, TraceRecord};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    /// Retryable transport or server failure.
    #[error("transient backend failure: {0}")]
    Transient(String),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

impl BackendError {
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Transient(_))
    }
}

/// One system/user message pair sent to a chat model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_message: String,
    pub user_message: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Free-form label used for logging and mock matching.
    pub tag: String,
}

impl ChatRequest {
    pub fn new(tag: impl Into<String>, system: impl Into<String>, user: impl Into<String>) -> Self {
        ChatRequest {
            system_message: system.into(),
            user_message: user.into(),
            temperature: 0.0,
            max_tokens: 1024,
            tag: tag.into(),
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        // The QA prompt has no system message, so only the user turn is required.
        if self.user_message.trim().is_empty() {
            return Err(BackendError::InvalidRequest("empty user message".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(BackendError::InvalidRequest(format!("temperature {} must be >= 0", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Stable content hash, used in traces.
    pub fn hash(&self) -> String {
        let canonical = format!(
            "{}\u{1f}{}\u{1f}{}\u{1f}{}\u{1f}{}",
            self.tag, self.system_message, self.user_message, self.temperature, self.max_tokens
        );
        crate::text::sha256_hex(canonical.as_bytes())[..16].to_string()
    }

    fn estimated_tokens(&self) -> u64 {
        estimate_tokens(&self.system_message) + estimate_tokens(&self.user_message)
    }
}

/// Rough token count (four characters per token).
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

/// A text-generation service.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;

    /// Whether identical inputs always produce identical outputs. Traces of
    /// deterministic backends record zero latency so they stay byte-stable.
    fn is_deterministic(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 3, base_delay_ms: 500, max_delay_ms: 8_000 }
    }
}

impl RetryPolicy {
    pub fn immediate(max_retries: u32) -> Self {
        RetryPolicy { max_retries, base_delay_ms: 0, max_delay_ms: 0 }
    }

    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt).unwrap_or(u64::MAX);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms))
    }
}

/// Per-run cap on model calls and tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetLimits {
    pub max_calls: u64,
    pub max_tokens: u64,
}

impl Default for BudgetLimits {
    fn default() -> Self {
        BudgetLimits { max_calls: 60, max_tokens: 200_000 }
    }
}

#[derive(Debug, Default)]
struct BudgetUsage {
    calls: AtomicU64,
    tokens: AtomicU64,
}

/// Chat backend with retries, budget enforcement and tracing.
#[derive(Clone)]
pub struct LlmClient {
    backend: Arc<dyn ChatBackend>,
    retry: RetryPolicy,
    limits: BudgetLimits,
    usage: Arc<BudgetUsage>,
    trace: Arc<TraceLog>,
}

impl LlmClient {
    pub fn new(backend: Arc<dyn ChatBackend>) -> Self {
        LlmClient {
            backend,
            retry: RetryPolicy::default(),
            limits: BudgetLimits::default(),
            usage: Arc::default(),
            trace: Arc::new(TraceLog::in_memory()),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_budget(mut self, limits: BudgetLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn with_trace(mut self, trace: Arc<TraceLog>) -> Self {
        self.trace = trace;
        self
    }

    pub fn trace(&self) -> &Arc<TraceLog> {
        &self.trace
    }

    pub fn calls_used(&self) -> u64 {
        self.usage.calls.load(Ordering::SeqCst)
    }

    pub fn tokens_used(&self) -> u64 {
        self.usage.tokens.load(Ordering::SeqCst)
    }

    /// Zeroes the usage counters at the start of a run.
    pub fn reset_budget(&self) {
        self.usage.calls.store(0, Ordering::SeqCst);
        self.usage.tokens.store(0, Ordering::SeqCst);
    }

    fn reserve(&self, request_tokens: u64) -> Result<(), String> {
        let calls = self.usage.calls.fetch_add(1, Ordering::SeqCst) + 1;
        if calls > self.limits.max_calls {
            return Err(format!("call cap of {} reached", self.limits.max_calls));
        }
        let tokens = self.usage.tokens.fetch_add(request_tokens, Ordering::SeqCst) + request_tokens;
        if tokens > self.limits.max_tokens {
            return Err(format!("token cap of {} reached ({tokens} estimated)", self.limits.max_tokens));
        }
        Ok(())
    }

    pub fn generate(&self, request: &ChatRequest) -> Result<String, BackendError> {
        request.validate()?;
        let request_hash = request.hash();
        let frozen = self.backend.is_deterministic();
        if let Err(why) = self.reserve(request.estimated_tokens()) {
            self.trace.append(TraceRecord::new(&request.tag, &request_hash, 0, 0, TraceOutcome::BudgetExceeded));
            return Err(BackendError::BudgetExceeded(why));
        }
        let mut attempt = 0u32;
        loop {
            let started = Instant::now();
            let result = self.backend.complete(request);
            let latency_ms = if frozen { 0 } else { started.elapsed().as_millis() as u64 };
            match result {
                Ok(text) => {
                    self.usage.tokens.fetch_add(estimate_tokens(&text), Ordering::SeqCst);
                    self.trace.append(TraceRecord::new(&request.tag, &request_hash, latency_ms, attempt, TraceOutcome::Ok));
                    return Ok(text);
                }
                Err(err) if err.is_transient() && attempt < self.retry.max_retries => {
                    tracing::warn!(tag = %request.tag, attempt, error = %err, "retrying backend call");
                    self.trace.append(TraceRecord::new(
                        &request.tag,
                        &request_hash,
                        latency_ms,
                        attempt,
                        TraceOutcome::Retry(err.to_string()),
                    ));
                    std::thread::sleep(self.retry.delay(attempt));
                    attempt += 1;
                }
                Err(err) => {
                    self.trace.append(TraceRecord::new(
                        &request.tag,
                        &request_hash,
                        latency_ms,
                        attempt,
                        TraceOutcome::Error(err.to_string()),
                    ));
                    return Err(match err {
                        BackendError::Transient(msg) => BackendError::Unavailable(format!(
                            "{msg} (after {} attempts)",
                            attempt + 1
                        )),
                        other => other,
                    });
                }
            }
        }
    }
}

impl std::fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmClient")
            .field("retry", &self.retry)
            .field("limits", &self.limits)
            .field("calls_used", &self.calls_used())
            .finish_non_exhaustive()
    }
}
