//! TOML run configuration: backends, retrieval and orchestration settings,
//! re-ranker model, prompt overrides and blocklist.
//!
//! String values may reference environment variables as `${NAME}`; relative
//! paths resolve against the config file's directory.
//!
//! ```toml
//! [backend]
//! kind = "mock"
//! script = "mock_script.json"
//!
//! [search]
//! kind = "fixture"
//! hits = "search.json"
//! pages = "web"
//!
//! [orchestrator]
//! n_plans = 4
//! ```

use std::path::{Path, PathBuf};
use std::sync::{Arc, LazyLock};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::backend::{
    Blocklist, BudgetLimits, ChatBackend, DocumentFetcher, Embedder, FixtureSearch, GoogleSearch, HashEmbedder,
    HttpChat, HttpEmbedder, HttpEndpoint, HttpFetcher, LlmClient, MockChat, MockScript, RetryPolicy, TraceLog,
    WebSearch,
};
use crate::investigator::{Corpus, FixtureFetcher, Investigator, RetrievalParams};
use crate::orchestrator::{OrchestratorParams, Pipeline};
use crate::prompts::{PromptSet, ReviewerExample};
use crate::reranker::{ExternalScorer, LinearModel, NativeScorer, PlanScorer};

pub type WebBackends = (Arc<dyn WebSearch>, Arc<dyn DocumentFetcher>);

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("environment variable `{0}` referenced by the config is not set")]
    MissingEnv(String),
    #[error("building {what}: {message}")]
    Build { what: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendConfig {
    Mock { script: PathBuf },
    Http(HttpEndpoint),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EmbeddingConfig {
    Hash {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    Http {
        #[serde(flatten)]
        endpoint: HttpEndpoint,
        dim: usize,
    },
}

fn default_dim() -> usize {
    256
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig::Hash { dim: default_dim(), seed: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SearchConfig {
    #[default]
    None,
    /// Canned hits plus a corpus directory whose manifest URLs serve as
    /// fetchable pages.
    Fixture { hits: PathBuf, pages: Option<PathBuf> },
    Google {
        api_key: String,
        engine_id: String,
        #[serde(default)]
        endpoint: Option<String>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RerankerConfig {
    /// Saved linear model; absent means an untrained model.
    #[serde(default)]
    pub model: Option<PathBuf>,
    /// HTTP scorer, used instead of `model` when set.
    #[serde(default)]
    pub external_url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendConfig,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub retrieval: RetrievalParams,
    #[serde(default)]
    pub orchestrator: OrchestratorParams,
    #[serde(default)]
    pub reranker: RerankerConfig,
    #[serde(default)]
    pub budget: BudgetLimits,
    /// Defaults to immediate retries for the mock backend.
    #[serde(default)]
    pub retry: Option<RetryPolicy>,
    #[serde(default)]
    pub prompts_dir: Option<PathBuf>,
    #[serde(default)]
    pub reviewer_examples: Option<PathBuf>,
    /// Replaces the default peer-review blocklist when set.
    #[serde(default)]
    pub blocklist: Option<Vec<String>>,
    #[serde(default)]
    pub trace_file: Option<PathBuf>,
}

static ENV_REF: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}").expect("valid regex"));

/// Replaces `${NAME}` with the variable's value.
pub fn interpolate_env(text: &str, lookup: &dyn Fn(&str) -> Option<String>) -> Result<String, ConfigError> {
    let mut missing = None;
    let out = ENV_REF.replace_all(text, |c: &regex::Captures| match lookup(&c[1]) {
        Some(v) => v,
        None => {
            missing.get_or_insert_with(|| c[1].to_string());
            String::new()
        }
    });
    match missing {
        Some(name) => Err(ConfigError::MissingEnv(name)),
        None => Ok(out.into_owned()),
    }
}

fn interpolate_value(value: &mut toml::Value, lookup: &dyn Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
    match value {
        toml::Value::String(s) => *s = interpolate_env(s, lookup)?,
        toml::Value::Array(items) => items.iter_mut().try_for_each(|v| interpolate_value(v, lookup))?,
        toml::Value::Table(table) => table.iter_mut().try_for_each(|(_, v)| interpolate_value(v, lookup))?,
        _ => {}
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml_str(text: &str, lookup: &dyn Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut value: toml::Value = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        interpolate_value(&mut value, lookup)?;
        let config: RunConfig = value.try_into().map_err(|e: toml::de::Error| ConfigError::Invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads, interpolates from the process environment, validates and
    /// resolves relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let mut config = Self::from_toml_str(&text, &|k| std::env::var(k).ok())?;
        config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let o = &self.orchestrator;
        let r = &self.retrieval;
        let checks = [
            (o.n_plans >= 1, "orchestrator.n_plans must be at least 1"),
            (o.controller_attempts >= 1, "orchestrator.controller_attempts must be at least 1"),
            (o.planner_temperature > 0.0, "orchestrator.planner_temperature must be positive"),
            ((0.0..=1.0).contains(&o.quote_similarity), "orchestrator.quote_similarity must lie in [0, 1]"),
            (r.chunk_chars > r.overlap_chars, "retrieval.chunk_chars must exceed retrieval.overlap_chars"),
            (r.top_k >= 1, "retrieval.top_k must be at least 1"),
            (self.budget.max_calls >= 1, "budget.max_calls must be at least 1"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(ConfigError::Invalid(msg.to_string())),
            None => Ok(()),
        }
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let BackendConfig::Mock { script } = &mut self.backend {
            fix(script);
        }
        if let SearchConfig::Fixture { hits, pages } = &mut self.search {
            fix(hits);
            pages.as_mut().map(fix);
        }
        for p in [&mut self.reranker.model, &mut self.prompts_dir, &mut self.reviewer_examples, &mut self.trace_file]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    fn build_err(what: &'static str) -> impl Fn(String) -> ConfigError {
        move |message| ConfigError::Build { what, message }
    }

    pub fn chat_backend(&self) -> Result<Arc<dyn ChatBackend>, ConfigError> {
        Ok(match &self.backend {
            BackendConfig::Mock { script } => {
                Arc::new(MockChat::new(MockScript::load(script).map_err(|e| Self::build_err("mock backend")(e.to_string()))?))
            }
            BackendConfig::Http(endpoint) => {
                Arc::new(HttpChat::new(endpoint.clone()).map_err(|e| Self::build_err("chat backend")(e.to_string()))?)
            }
        })
    }

    pub fn embedder(&self) -> Result<Arc<dyn Embedder>, ConfigError> {
        Ok(match &self.embedding {
            EmbeddingConfig::Hash { dim, seed: None } => Arc::new(HashEmbedder::new(*dim)),
            EmbeddingConfig::Hash { dim, seed: Some(seed) } => Arc::new(HashEmbedder::with_seed(*dim, *seed)),
            EmbeddingConfig::Http { endpoint, dim } => Arc::new(
                HttpEmbedder::new(endpoint.clone(), *dim).map_err(|e| Self::build_err("embedder")(e.to_string()))?,
            ),
        })
    }

    pub fn web(&self) -> Result<Option<WebBackends>, ConfigError> {
        let err = Self::build_err("web search");
        Ok(match &self.search {
            SearchConfig::None => None,
            SearchConfig::Fixture { hits, pages } => {
                let search = FixtureSearch::load(hits).map_err(|e| err(e.to_string()))?;
                let corpus = match pages {
                    Some(dir) => Corpus::load_dir(dir).map_err(|e| err(e.to_string()))?,
                    None => Corpus::default(),
                };
                Some((Arc::new(search), Arc::new(FixtureFetcher::new(&corpus))))
            }
            SearchConfig::Google { api_key, engine_id, endpoint } => {
                let mut google = GoogleSearch::new(api_key.clone(), engine_id.clone()).map_err(|e| err(e.to_string()))?;
                if let Some(url) = endpoint {
                    google = google.with_endpoint(url);
                }
                let fetcher = HttpFetcher::new()
                    .map_err(|e| err(e.to_string()))?
                    .with_max_bytes(self.retrieval.max_doc_bytes);
                Some((Arc::new(google), Arc::new(fetcher)))
            }
        })
    }

    pub fn scorer(&self) -> Result<Arc<dyn PlanScorer>, ConfigError> {
        let err = Self::build_err("re-ranker");
        if let Some(url) = &self.reranker.external_url {
            return Ok(Arc::new(ExternalScorer::new(url).map_err(|e| err(e.to_string()))?));
        }
        let model = match &self.reranker.model {
            Some(path) => LinearModel::load(path).map_err(|e| err(e.to_string()))?,
            None => LinearModel::zeros(),
        };
        Ok(Arc::new(NativeScorer::new(model)))
    }

    pub fn prompts(&self) -> Result<PromptSet, ConfigError> {
        match &self.prompts_dir {
            Some(dir) => PromptSet::load_dir(dir).map_err(|e| Self::build_err("prompts")(e.to_string())),
            None => Ok(PromptSet::builtin()),
        }
    }

    pub fn llm_client(&self) -> Result<LlmClient, ConfigError> {
        let trace = match &self.trace_file {
            Some(path) => TraceLog::with_file(path).map_err(|e| Self::build_err("trace file")(e.to_string()))?,
            None => TraceLog::in_memory(),
        };
        let retry = self.retry.unwrap_or(match self.backend {
            BackendConfig::Mock { .. } => RetryPolicy::immediate(3),
            BackendConfig::Http(_) => RetryPolicy::default(),
        });
        Ok(LlmClient::new(self.chat_backend()?).with_retry(retry).with_budget(self.budget).with_trace(Arc::new(trace)))
    }

    /// Wires every component into a pipeline.
    pub fn build_pipeline(&self) -> Result<Pipeline, ConfigError> {
        let llm = self.llm_client()?;
        let embedder = self.embedder()?;
        let prompts = Arc::new(self.prompts()?);
        let mut investigator = Investigator::new(llm.clone(), embedder.clone())
            .with_params(self.retrieval)
            .with_prompts(prompts.clone());
        if let Some(domains) = &self.blocklist {
            investigator = investigator.with_blocklist(Blocklist::new(domains));
        }
        if let Some((search, fetcher)) = self.web()? {
            investigator = investigator.with_web(search, fetcher);
        }
        let examples = match &self.reviewer_examples {
            Some(path) => ReviewerExample::load(path).map_err(|e| Self::build_err("reviewer examples")(e.to_string()))?,
            None => ReviewerExample::builtin(),
        };
        Ok(Pipeline::new(llm, embedder)
            .with_investigator(investigator)
            .with_prompts(prompts)
            .with_scorer(self.scorer()?)
            .with_examples(examples)
            .with_params(self.orchestrator))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &'static [(&'static str, &'static str)]) -> impl Fn(&str) -> Option<String> {
        move |k| pairs.iter().find(|(n, _)| *n == k).map(|(_, v)| v.to_string())
    }

    #[test]
    fn minimal_mock_config() {
        let c = RunConfig::from_toml_str("[backend]\nkind = \"mock\"\nscript = \"s.json\"\n", &env(&[])).unwrap();
        assert_eq!(c.backend, BackendConfig::Mock { script: "s.json".into() });
        assert_eq!(c.orchestrator.n_plans, 4);
        assert_eq!(c.search, SearchConfig::None);
    }

    #[test]
    fn env_values_are_interpolated() {
        let text = "[backend]\nkind = \"http\"\nbase_url = \"${BASE}/v1\"\nmodel = \"m\"\n";
        let c = RunConfig::from_toml_str(text, &env(&[("BASE", "http://localhost:9")])).unwrap();
        match c.backend {
            BackendConfig::Http(e) => assert_eq!(e.base_url, "http://localhost:9/v1"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(RunConfig::from_toml_str(text, &env(&[])), Err(ConfigError::MissingEnv(n)) if n == "BASE"));
    }

    #[test]
    fn missing_and_unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml_str("[backend]\nscript = \"s\"\n", &env(&[])), Err(ConfigError::Invalid(_))));
        assert!(matches!(RunConfig::from_toml_str("", &env(&[])), Err(ConfigError::Invalid(_))));
        let extra = "[backend]\nkind = \"mock\"\nscript = \"s\"\n[orchestrator]\nn_plan = 3\n";
        assert!(matches!(RunConfig::from_toml_str(extra, &env(&[])), Err(ConfigError::Invalid(_))));
        let bad = "speed = 1\n[backend]\nkind = \"mock\"\nscript = \"s\"\n";
        assert!(matches!(RunConfig::from_toml_str(bad, &env(&[])), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn http_embedding_section() {
        let text = "[backend]\nkind = \"mock\"\nscript = \"s\"\n[embedding]\nkind = \"http\"\nbase_url = \"http://e\"\nmodel = \"emb\"\ndim = 8\n";
        let c = RunConfig::from_toml_str(text, &env(&[])).unwrap();
        assert!(matches!(c.embedding, EmbeddingConfig::Http { dim: 8, ref endpoint } if endpoint.model == "emb"));
    }

    #[test]
    fn semantic_validation() {
        let text = "[backend]\nkind = \"mock\"\nscript = \"s\"\n[retrieval]\nchunk_chars = 10\noverlap_chars = 10\n";
        assert!(matches!(RunConfig::from_toml_str(text, &env(&[])), Err(ConfigError::Invalid(m)) if m.contains("overlap")));
    }

    #[test]
    fn relative_paths_resolve_against_the_config_directory() {
        let mut c = RunConfig::from_toml_str(
            "prompts_dir = \"p\"\n[backend]\nkind = \"mock\"\nscript = \"s.json\"\n[search]\nkind = \"fixture\"\nhits = \"/abs/h.json\"\n",
            &env(&[]),
        )
        .unwrap();
        c.resolve_paths(Path::new("/cfg"));
        assert_eq!(c.backend, BackendConfig::Mock { script: "/cfg/s.json".into() });
        assert_eq!(c.prompts_dir, Some("/cfg/p".into()));
        assert_eq!(c.search, SearchConfig::Fixture { hits: "/abs/h.json".into(), pages: None });
    }
}
