use std::path::Path;

use serde::{Deserialize, Serialize};
use url::Url;

use super::BackendError;

/// Peer-review hosts that must never leak into retrieved evidence.
pub const DEFAULT_BLOCKLIST: [&str; 3] = ["openreview.net", "peerj.com", "f1000research.com"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub url: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub snippet: String,
}

impl SearchHit {
    pub fn new(url: &str, title: &str, snippet: &str) -> Self {
        SearchHit { url: url.into(), title: title.into(), snippet: snippet.into() }
    }
}

/// Domain blocklist. A host is blocked when it equals a listed domain or is a
/// subdomain of one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Blocklist {
    domains: Vec<String>,
}

impl Default for Blocklist {
    fn default() -> Self {
        Blocklist::new(DEFAULT_BLOCKLIST)
    }
}

impl Blocklist {
    pub fn new<I, S>(domains: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let domains = domains
            .into_iter()
            .map(|d| d.as_ref().trim().trim_start_matches("www.").trim_matches('.').to_ascii_lowercase())
            .filter(|d| !d.is_empty())
            .collect();
        Blocklist { domains }
    }

    pub fn empty() -> Self {
        Blocklist { domains: Vec::new() }
    }

    pub fn domains(&self) -> &[String] {
        &self.domains
    }

    pub fn blocks_host(&self, host: &str) -> bool {
        let host = host.trim_end_matches('.').to_ascii_lowercase();
        self.domains.iter().any(|d| host == *d || host.ends_with(&format!(".{d}")))
    }

    /// Whether a URL may be used. Unparseable or host-less URLs are rejected
    /// whenever the list is non-empty, since their host cannot be checked.
    pub fn allows(&self, url: &str) -> bool {
        if self.domains.is_empty() {
            return true;
        }
        match Url::parse(url).ok().and_then(|u| u.host_str().map(str::to_string)) {
            Some(host) => !self.blocks_host(&host),
            None => false,
        }
    }

    pub fn filter(&self, hits: Vec<SearchHit>) -> Vec<SearchHit> {
        hits.into_iter().filter(|h| self.allows(&h.url)).collect()
    }
}

pub trait WebSearch: Send + Sync {
    /// Raw hits, before blocklist filtering.
    fn raw_search(&self, query: &str) -> Result<Vec<SearchHit>, BackendError>;
}

/// Runs a search and drops blocklisted hits.
pub fn search(backend: &dyn WebSearch, query: &str, blocklist: &Blocklist) -> Result<Vec<SearchHit>, BackendError> {
    if query.trim().is_empty() {
        return Err(BackendError::InvalidRequest("empty search query".into()));
    }
    let hits = backend.raw_search(query)?;
    let before = hits.len();
    let kept = blocklist.filter(hits);
    if kept.len() < before {
        tracing::debug!(query, dropped = before - kept.len(), "blocklist removed search hits");
    }
    Ok(kept)
}

/// Canned hits for queries containing a substring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRule {
    pub contains: String,
    pub hits: Vec<SearchHit>,
}

/// Offline search backend. The first rule whose substring occurs in the
/// query (case-insensitively) supplies the hits.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureSearch {
    #[serde(default)]
    pub rules: Vec<SearchRule>,
    #[serde(default)]
    pub default: Vec<SearchHit>,
}

impl FixtureSearch {
    pub fn new(default: Vec<SearchHit>) -> Self {
        FixtureSearch { rules: Vec::new(), default }
    }

    pub fn rule(mut self, contains: &str, hits: Vec<SearchHit>) -> Self {
        self.rules.push(SearchRule { contains: contains.into(), hits });
        self
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("reading search fixture {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| BackendError::Config(format!("parsing search fixture {}: {e}", path.display())))
    }
}

impl WebSearch for FixtureSearch {
    fn raw_search(&self, query: &str) -> Result<Vec<SearchHit>, BackendError> {
        let q = query.to_lowercase();
        Ok(self
            .rules
            .iter()
            .find(|r| q.contains(&r.contains.to_lowercase()))
            .map(|r| r.hits.clone())
            .unwrap_or_else(|| self.default.clone()))
    }
}

/// Google Programmable Search (Custom Search JSON API).
#[derive(Debug, Clone)]
pub struct GoogleSearch {
    pub endpoint: String,
    pub api_key: String,
    pub engine_id: String,
    pub num: u32,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct GoogleResponse {
    #[serde(default)]
    items: Vec<GoogleItem>,
}

#[derive(Deserialize)]
struct GoogleItem {
    link: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    snippet: String,
}

impl GoogleSearch {
    pub const DEFAULT_ENDPOINT: &'static str = "https://www.googleapis.com/customsearch/v1";

    pub fn new(api_key: String, engine_id: String) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(30))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(GoogleSearch { endpoint: Self::DEFAULT_ENDPOINT.into(), api_key, engine_id, num: 10, client })
    }

    pub fn with_endpoint(mut self, endpoint: &str) -> Self {
        self.endpoint = endpoint.to_string();
        self
    }
}

impl WebSearch for GoogleSearch {
    fn raw_search(&self, query: &str) -> Result<Vec<SearchHit>, BackendError> {
        let num = self.num.clamp(1, 10).to_string();
        let response = self
            .client
            .get(&self.endpoint)
            .query(&[("key", self.api_key.as_str()), ("cx", self.engine_id.as_str()), ("q", query), ("num", &num)])
            .send()
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(BackendError::Transient(format!("search returned {status}")));
        }
        if !status.is_success() {
            return Err(BackendError::Unavailable(format!("search returned {status}")));
        }
        let body: GoogleResponse = response.json().map_err(|e| BackendError::Unavailable(e.to_string()))?;
        Ok(body.items.into_iter().map(|i| SearchHit { url: i.link, title: i.title, snippet: i.snippet }).collect())
    }
}
