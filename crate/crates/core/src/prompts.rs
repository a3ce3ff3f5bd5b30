//! Prompt templates with `{placeholder}` slots.
//!
//! The built-in set is compiled in from `prompts/`; [`PromptSet::load_dir`]
//! overrides individual files from a directory with the same file names.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::LazyLock;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};

use crate::aspect::Aspect;

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([a-z][a-z \-]*)\}").unwrap());

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("template `{template}` needs a value for `{{{placeholder}}}`")]
    MissingValue { template: String, placeholder: String },
    #[error("template `{template}` has no `{{{placeholder}}}` slot")]
    UnusedValue { template: String, placeholder: String },
    #[error("reading prompt file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing {what}: {source}")]
    Parse { what: String, source: serde_json::Error },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub name: String,
    pub text: String,
}

impl Template {
    pub fn new(name: &str, text: &str) -> Self {
        Template { name: name.into(), text: text.trim_end().to_string() }
    }

    pub fn placeholders(&self) -> BTreeSet<String> {
        PLACEHOLDER.captures_iter(&self.text).map(|c| c[1].to_string()).collect()
    }

    /// Single-pass substitution: substituted values are never re-scanned, so
    /// values may contain braces. Every slot must be filled and every value
    /// must have a slot.
    pub fn render(&self, values: &[(&str, &str)]) -> Result<String, PromptError> {
        let slots = self.placeholders();
        if let Some((key, _)) = values.iter().find(|(k, _)| !slots.contains(*k)) {
            return Err(PromptError::UnusedValue { template: self.name.clone(), placeholder: key.to_string() });
        }
        if let Some(slot) = slots.iter().find(|s| !values.iter().any(|(k, _)| k == s)) {
            return Err(PromptError::MissingValue { template: self.name.clone(), placeholder: slot.clone() });
        }
        Ok(PLACEHOLDER
            .replace_all(&self.text, |c: &Captures| {
                values.iter().find(|(k, _)| *k == &c[1]).map(|(_, v)| v.to_string()).unwrap_or_default()
            })
            .into_owned())
    }
}

macro_rules! builtin {
    ($file:literal) => {
        ($file, include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/prompts/", $file)))
    };
}

const BUILTIN: [(&str, &str); 11] = [
    builtin!("planner.system.txt"),
    builtin!("planner.user.txt"),
    builtin!("controller.system.txt"),
    builtin!("controller.user.txt"),
    builtin!("qa.user.txt"),
    builtin!("reviewer.system.txt"),
    builtin!("reviewer.user.txt"),
    builtin!("closed_book_qa.user.txt"),
    builtin!("cross_check.user.txt"),
    builtin!("plan_struct.user.txt"),
    builtin!("plan_unstruct.user.txt"),
];

/// All templates used by the pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    pub planner_system: Template,
    pub planner_user: Template,
    pub controller_system: Template,
    pub controller_user: Template,
    pub qa_user: Template,
    pub reviewer_system: Template,
    pub reviewer_user: Template,
    pub closed_book_qa_user: Template,
    pub cross_check_user: Template,
    pub plan_struct_user: Template,
    pub plan_unstruct_user: Template,
}

impl PromptSet {
    pub fn builtin() -> Self {
        Self::from_lookup(|file| BUILTIN.iter().find(|(f, _)| *f == file).map(|(_, t)| t.to_string()).unwrap())
    }

    /// Built-in templates, with any file present in `dir` taking precedence.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut loaded = Vec::new();
        for (file, text) in BUILTIN {
            let path = dir.join(file);
            let text = if path.exists() {
                std::fs::read_to_string(&path)
                    .map_err(|source| PromptError::Io { path: path.display().to_string(), source })?
            } else {
                text.to_string()
            };
            loaded.push((file, text));
        }
        Ok(Self::from_lookup(|file| loaded.iter().find(|(f, _)| *f == file).map(|(_, t)| t.clone()).unwrap()))
    }

    fn from_lookup(get: impl Fn(&str) -> String) -> Self {
        let t = |file: &str| Template::new(file.trim_end_matches(".txt"), &get(file));
        PromptSet {
            planner_system: t("planner.system.txt"),
            planner_user: t("planner.user.txt"),
            controller_system: t("controller.system.txt"),
            controller_user: t("controller.user.txt"),
            qa_user: t("qa.user.txt"),
            reviewer_system: t("reviewer.system.txt"),
            reviewer_user: t("reviewer.user.txt"),
            closed_book_qa_user: t("closed_book_qa.user.txt"),
            cross_check_user: t("cross_check.user.txt"),
            plan_struct_user: t("plan_struct.user.txt"),
            plan_unstruct_user: t("plan_unstruct.user.txt"),
        }
    }
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::builtin()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleQa {
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleOutput {
    pub reasoning: String,
    pub label: String,
    pub review: String,
}

/// One worked reviewer example shown in-context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewerExample {
    pub paragraph: String,
    pub context: Vec<ExampleQa>,
    pub output: ExampleOutput,
}

const BUILTIN_EXAMPLES: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/reviewer_examples.json"));

impl ReviewerExample {
    /// The bundled set: one synthetic example per in-scope aspect.
    pub fn builtin() -> Vec<ReviewerExample> {
        serde_json::from_str(BUILTIN_EXAMPLES).expect("bundled reviewer examples parse")
    }

    pub fn load(path: &Path) -> Result<Vec<ReviewerExample>, PromptError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| PromptError::Io { path: path.display().to_string(), source })?;
        serde_json::from_str(&text).map_err(|source| PromptError::Parse { what: path.display().to_string(), source })
    }

    pub fn aspect(&self) -> Option<Aspect> {
        self.output.label.parse().ok()
    }
}

/// Paragraph plus question/answer lines, the shape the reviewer prompt's
/// `{context}` slot receives.
pub fn render_review_context<'a>(paragraph: &str, qa: impl IntoIterator<Item = (&'a str, &'a str)>) -> String {
    let mut out = format!("Paragraph: {paragraph}\n\nContext:");
    let mut any = false;
    for (q, a) in qa {
        out.push_str(&format!("\n{q}\n* {a}"));
        any = true;
    }
    if !any {
        out.push_str("\n(none)");
    }
    out
}

/// Unanswered example pairs are left out, as they are for live context.
pub fn render_examples(examples: &[ReviewerExample]) -> String {
    examples
        .iter()
        .enumerate()
        .map(|(i, ex)| {
            let answered = ex.context.iter().filter(|c| !crate::investigator::is_refusal(&c.answer));
            let ctx = render_review_context(&ex.paragraph, answered.map(|c| (c.question.as_str(), c.answer.as_str())));
            let output = serde_json::json!({
                "reasoning": ex.output.reasoning,
                "label": ex.output.label,
                "review": ex.output.review,
            });
            format!("\n\nExample {}:\n{ctx}\nOutput: {output}", i + 1)
        })
        .collect()
}
