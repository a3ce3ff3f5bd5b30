use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::plan::{Action, PlanStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControlActor {
    Investigator,
    Reviewer,
    Controller,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    AnswerFromPaper,
    AnswerFromWeb,
    WriteReview,
    SkipStep,
}

/// One option the controller may choose from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSpec {
    pub actor: ControlActor,
    pub kind: ActionKind,
    /// Name as it appears in the controller prompt.
    pub name: &'static str,
    pub parameters: &'static [&'static str],
}

pub const ACTION_REGISTRY: [ActionSpec; 4] = [
    ActionSpec {
        actor: ControlActor::Investigator,
        kind: ActionKind::AnswerFromPaper,
        name: "Answer question using the paper",
        parameters: &["question"],
    },
    ActionSpec {
        actor: ControlActor::Investigator,
        kind: ActionKind::AnswerFromWeb,
        name: "Answer question using Google",
        parameters: &["question"],
    },
    ActionSpec { actor: ControlActor::Reviewer, kind: ActionKind::WriteReview, name: "Write review", parameters: &[] },
    ActionSpec { actor: ControlActor::Controller, kind: ActionKind::SkipStep, name: "Skip this step", parameters: &[] },
];

impl ActionKind {
    pub fn spec(self) -> &'static ActionSpec {
        ACTION_REGISTRY.iter().find(|s| s.kind == self).expect("every kind is registered")
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.spec().name)
    }
}

/// A controller decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentAction {
    pub explanation: String,
    pub actor: ControlActor,
    pub action: ActionKind,
    pub parameters: BTreeMap<String, String>,
}

impl AgentAction {
    pub fn question(&self) -> Option<&str> {
        self.parameters.get("question").map(String::as_str)
    }

    pub fn skip(explanation: impl Into<String>) -> Self {
        AgentAction {
            explanation: explanation.into(),
            actor: ControlActor::Controller,
            action: ActionKind::SkipStep,
            parameters: BTreeMap::new(),
        }
    }

    /// The step executed as written, used when the controller cannot be
    /// reached. Steps without a recognised action become skips.
    pub fn literal(step: &PlanStep) -> Self {
        let kind = match step.action {
            Action::AnswerFromPaper => ActionKind::AnswerFromPaper,
            Action::AnswerFromWeb => ActionKind::AnswerFromWeb,
            Action::WriteReview => ActionKind::WriteReview,
            Action::Undefined => return Self::skip("literal execution: step has no recognised action"),
        };
        let mut parameters = BTreeMap::new();
        if let Some(q) = &step.question {
            parameters.insert("question".to_string(), q.clone());
        }
        AgentAction {
            explanation: "literal execution of the planned step".into(),
            actor: kind.spec().actor,
            action: kind,
            parameters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ActionParseError {
    #[error("no JSON object found in the reply")]
    NoJson,
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("field `{0}` is missing")]
    MissingField(&'static str),
    #[error("field `{0}` has the wrong type")]
    WrongType(&'static str),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("action `{action}` belongs to actor {expected:?}, not `{found}`")]
    ActorMismatch { action: String, expected: ControlActor, found: String },
    #[error("action `{action}` takes parameters {expected:?}, got {found:?}")]
    Parameters { action: String, expected: Vec<String>, found: Vec<String> },
}

/// The first JSON object in `text`, ignoring any prose or code fences around
/// it.
pub fn first_json_object(text: &str) -> Result<serde_json::Map<String, Value>, ActionParseError> {
    let start = text.find('{').ok_or(ActionParseError::NoJson)?;
    let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
    match stream.next() {
        Some(Ok(Value::Object(map))) => Ok(map),
        Some(Ok(_)) => Err(ActionParseError::NoJson),
        Some(Err(e)) => Err(ActionParseError::Json(e.to_string())),
        None => Err(ActionParseError::NoJson),
    }
}

fn key(s: &str) -> String {
    s.trim().trim_end_matches('.').chars().filter(|c| !c.is_whitespace() && *c != '_').collect::<String>().to_lowercase()
}

fn string_field<'a>(map: &'a serde_json::Map<String, Value>, name: &'static str) -> Result<&'a str, ActionParseError> {
    match map.get(name) {
        None => Err(ActionParseError::MissingField(name)),
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(ActionParseError::WrongType(name)),
    }
}

/// Parses and validates a controller reply against [`ACTION_REGISTRY`].
/// Action and actor names match case-insensitively, by prompt name or enum
/// name.
pub fn parse_agent_action(text: &str) -> Result<AgentAction, ActionParseError> {
    let map = first_json_object(text)?;
    let explanation = string_field(&map, "explanation")?;
    let actor = string_field(&map, "actor")?;
    let action = string_field(&map, "action")?;
    let spec = ACTION_REGISTRY
        .iter()
        .find(|s| key(s.name) == key(action) || key(&format!("{:?}", s.kind)) == key(action))
        .ok_or_else(|| ActionParseError::UnknownAction(action.to_string()))?;
    if key(&format!("{:?}", spec.actor)) != key(actor) {
        return Err(ActionParseError::ActorMismatch {
            action: action.to_string(),
            expected: spec.actor,
            found: actor.to_string(),
        });
    }
    let params = match map.get("parameters") {
        None => return Err(ActionParseError::MissingField("parameters")),
        Some(Value::Object(p)) => p,
        Some(_) => return Err(ActionParseError::WrongType("parameters")),
    };
    let mut parameters = BTreeMap::new();
    for (k, v) in params {
        let Value::String(v) = v else {
            return Err(ActionParseError::WrongType("parameters"));
        };
        parameters.insert(k.clone(), v.trim().to_string());
    }
    let found: Vec<String> = parameters.keys().cloned().collect();
    let mut expected: Vec<String> = spec.parameters.iter().map(|s| s.to_string()).collect();
    expected.sort();
    if found != expected || parameters.values().any(String::is_empty) {
        return Err(ActionParseError::Parameters { action: spec.name.to_string(), expected, found });
    }
    Ok(AgentAction { explanation: explanation.to_string(), actor: spec.actor, action: spec.kind, parameters })
}
