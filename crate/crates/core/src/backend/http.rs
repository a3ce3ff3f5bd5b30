//! OpenAI-compatible chat-completion and embedding endpoints.

use std::time::Duration;

use reqwest::blocking::{Client, Response};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{BackendError, ChatBackend, ChatRequest, Embedder, EmbeddingVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpEndpoint {
    /// Base URL, e.g. `https://api.openai.com/v1`.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    120
}

impl HttpEndpoint {
    pub fn new(base_url: &str, model: &str) -> Self {
        HttpEndpoint { base_url: base_url.into(), model: model.into(), api_key_env: None, timeout_secs: default_timeout() }
    }

    pub fn with_api_key_env(mut self, var: &str) -> Self {
        self.api_key_env = Some(var.into());
        self
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.base_url.trim_end_matches('/'), path)
    }

    fn api_key(&self) -> Result<Option<String>, BackendError> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| BackendError::Config(format!("environment variable {var} is not set"))),
        }
    }

    fn client(&self) -> Result<Client, BackendError> {
        Client::builder()
            .timeout(Duration::from_secs(self.timeout_secs))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))
    }

    fn post(&self, client: &Client, path: &str, body: &serde_json::Value) -> Result<Response, BackendError> {
        let mut req = client.post(self.url(path)).json(body);
        if let Some(key) = self.api_key()? {
            req = req.bearer_auth(key);
        }
        let response = req.send().map_err(|e| BackendError::Transient(e.to_string()))?;
        classify_status(response.status().as_u16())?;
        Ok(response)
    }
}

/// 429 and 5xx are retryable; other non-2xx statuses are not.
pub(crate) fn classify_status(status: u16) -> Result<(), BackendError> {
    match status {
        200..=299 => Ok(()),
        429 | 500..=599 => Err(BackendError::Transient(format!("HTTP {status}"))),
        400 | 404 | 413 | 422 => Err(BackendError::InvalidRequest(format!("HTTP {status}"))),
        _ => Err(BackendError::Unavailable(format!("HTTP {status}"))),
    }
}

#[derive(Debug, Clone)]
pub struct HttpChat {
    endpoint: HttpEndpoint,
    client: Client,
}

impl HttpChat {
    pub fn new(endpoint: HttpEndpoint) -> Result<Self, BackendError> {
        let client = endpoint.client()?;
        Ok(HttpChat { endpoint, client })
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

impl ChatBackend for HttpChat {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let mut messages = Vec::with_capacity(2);
        if !request.system_message.is_empty() {
            messages.push(json!({"role": "system", "content": request.system_message}));
        }
        messages.push(json!({"role": "user", "content": request.user_message}));
        let body = json!({
            "model": self.endpoint.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let response = self.endpoint.post(&self.client, "chat/completions", &body)?;
        let parsed: ChatResponse =
            response.json().map_err(|e| BackendError::Unavailable(format!("malformed chat response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Unavailable("chat response has no content".into()))
    }
}

#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    endpoint: HttpEndpoint,
    client: Client,
    dim: usize,
}

impl HttpEmbedder {
    pub fn new(endpoint: HttpEndpoint, dim: usize) -> Result<Self, BackendError> {
        let client = endpoint.client()?;
        Ok(HttpEmbedder { endpoint, client, dim })
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl Embedder for HttpEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::InvalidRequest("cannot embed empty text".into()));
        }
        let body = json!({"model": self.endpoint.model, "input": text});
        let response = self.endpoint.post(&self.client, "embeddings", &body)?;
        let parsed: EmbeddingResponse =
            response.json().map_err(|e| BackendError::Unavailable(format!("malformed embedding response: {e}")))?;
        let values = parsed
            .data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| BackendError::Unavailable("embedding response has no data".into()))?;
        if values.len() != self.dim {
            return Err(BackendError::Unavailable(format!(
                "embedding has dimension {}, expected {}",
                values.len(),
                self.dim
            )));
        }
        EmbeddingVector::new(values).map_err(|e| BackendError::Unavailable(e.to_string()))
    }

    fn dim(&self) -> usize {
        self.dim
    }
}
