//! Scripted chat backend for offline runs and tests.

use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{BackendError, ChatBackend, ChatRequest};

/// A canned response, selected when both matchers hold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRule {
    /// Exact request tag, if set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    /// Substring of the user message, if set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    /// Responses handed out in order on successive matches; the last one
    /// repeats.
    pub responses: Vec<String>,
    /// Number of transient failures to simulate before responding.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub fail_first: u32,
}

fn is_zero(n: &u32) -> bool {
    *n == 0
}

impl MockRule {
    pub fn new(tag: Option<&str>, contains: Option<&str>, response: impl Into<String>) -> Self {
        MockRule {
            tag: tag.map(str::to_string),
            contains: contains.map(str::to_string),
            responses: vec![response.into()],
            fail_first: 0,
        }
    }

    pub fn sequence(tag: Option<&str>, contains: Option<&str>, responses: Vec<String>) -> Self {
        MockRule { responses, ..MockRule::new(tag, contains, "") }
    }

    pub fn failing_first(mut self, n: u32) -> Self {
        self.fail_first = n;
        self
    }

    fn matches(&self, request: &ChatRequest) -> bool {
        self.tag.as_ref().is_none_or(|t| *t == request.tag)
            && self.contains.as_ref().is_none_or(|c| request.user_message.contains(c.as_str()))
    }
}

/// Ordered rules plus a default response. The first matching rule wins.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    pub rules: Vec<MockRule>,
    #[serde(default)]
    pub default: String,
}

impl MockScript {
    pub fn new(default: impl Into<String>) -> Self {
        MockScript { rules: Vec::new(), default: default.into() }
    }

    pub fn rule(mut self, rule: MockRule) -> Self {
        self.rules.push(rule);
        self
    }

    pub fn respond(self, tag: &str, contains: Option<&str>, response: impl Into<String>) -> Self {
        self.rule(MockRule::new(Some(tag), contains, response))
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("reading mock script {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| BackendError::Config(format!("parsing mock script {}: {e}", path.display())))
    }
}

#[derive(Debug, Default)]
struct MockState {
    hits: Vec<u32>,
    calls: Vec<ChatRequest>,
}

/// Deterministic chat backend driven by a [`MockScript`].
#[derive(Debug)]
pub struct MockChat {
    script: MockScript,
    state: Mutex<MockState>,
}

impl MockChat {
    pub fn new(script: MockScript) -> Self {
        let hits = vec![0; script.rules.len()];
        MockChat { script, state: Mutex::new(MockState { hits, calls: Vec::new() }) }
    }

    /// Every request received so far, in order.
    pub fn calls(&self) -> Vec<ChatRequest> {
        self.state.lock().expect("mock lock poisoned").calls.clone()
    }

    pub fn calls_tagged(&self, tag: &str) -> Vec<ChatRequest> {
        self.calls().into_iter().filter(|c| c.tag == tag).collect()
    }

    /// Rewinds all rule cursors and forgets recorded calls.
    pub fn reset(&self) {
        let mut state = self.state.lock().expect("mock lock poisoned");
        state.hits.iter_mut().for_each(|h| *h = 0);
        state.calls.clear();
    }
}

impl ChatBackend for MockChat {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let mut state = self.state.lock().expect("mock lock poisoned");
        state.calls.push(request.clone());
        let Some(i) = self.script.rules.iter().position(|r| r.matches(request)) else {
            return Ok(self.script.default.clone());
        };
        let rule = &self.script.rules[i];
        let hit = state.hits[i];
        state.hits[i] += 1;
        if hit < rule.fail_first {
            return Err(BackendError::Transient(format!("scripted failure {} of {}", hit + 1, rule.fail_first)));
        }
        let n = (hit - rule.fail_first) as usize;
        Ok(rule
            .responses
            .get(n)
            .or(rule.responses.last())
            .cloned()
            .unwrap_or_else(|| self.script.default.clone()))
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}
