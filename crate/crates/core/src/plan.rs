//! Agent plans: the planner's numbered list of investigator and reviewer
//! actions, with parsing, rendering and golden-rule validation.
//!
//! Parsing accepts both phrasings planners use in practice:
//!
//! ```text
//! 1. Investigator: Answer question using the paper: "What is X?"
//! 2. Search the web to understand how X compares to Y?
//! 3. Reviewer: Write a review based on the gathered context.
//! ```
//!
//! Parsing is lenient about prefixes; [`validate_plan`] enforces the form.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// The exact sentence that must form the final step of a plan.
pub const TERMINAL_STEP: &str = "Reviewer: Write a review based on the gathered context.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Actor {
    Investigator,
    Reviewer,
    #[serde(other)]
    Undefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    AnswerFromPaper,
    AnswerFromWeb,
    WriteReview,
    #[serde(other)]
    Undefined,
}

impl Action {
    pub fn is_investigation(self) -> bool {
        matches!(self, Action::AnswerFromPaper | Action::AnswerFromWeb)
    }

    /// The actor an action belongs to.
    pub fn expected_actor(self) -> Actor {
        match self {
            Action::AnswerFromPaper | Action::AnswerFromWeb => Actor::Investigator,
            Action::WriteReview => Actor::Reviewer,
            Action::Undefined => Actor::Undefined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    /// 1-based position in the plan.
    pub index: usize,
    pub actor: Actor,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    /// The step as written, without its list number.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub text: String,
}

impl PlanStep {
    pub fn answer_from_paper(index: usize, question: impl Into<String>) -> Self {
        Self::investigation(index, Action::AnswerFromPaper, question.into())
    }

    pub fn answer_from_web(index: usize, question: impl Into<String>) -> Self {
        Self::investigation(index, Action::AnswerFromWeb, question.into())
    }

    pub fn write_review(index: usize) -> Self {
        PlanStep {
            index,
            actor: Actor::Reviewer,
            action: Action::WriteReview,
            question: None,
            text: TERMINAL_STEP.to_string(),
        }
    }

    fn investigation(index: usize, action: Action, question: String) -> Self {
        let mut step = PlanStep {
            index,
            actor: Actor::Investigator,
            action,
            question: Some(question),
            text: String::new(),
        };
        step.text = step.canonical_text();
        step
    }

    /// Canonical rendering of the step, without the list number.
    pub fn canonical_text(&self) -> String {
        match (self.action, &self.question) {
            (Action::AnswerFromPaper, Some(q)) => {
                format!("Investigator: Answer question using the paper: \"{q}\"")
            }
            (Action::AnswerFromWeb, Some(q)) => {
                format!("Investigator: Answer question using Google: \"{q}\"")
            }
            (Action::WriteReview, _) => TERMINAL_STEP.to_string(),
            _ => self.text.clone(),
        }
    }

    /// The text a validator compares against: as written when known.
    fn written_text(&self) -> String {
        if self.text.is_empty() {
            self.canonical_text()
        } else {
            self.text.clone()
        }
    }

    /// Structural identity, ignoring the surface text.
    pub fn structure(&self) -> (usize, Actor, Action, Option<&str>) {
        (self.index, self.actor, self.action, self.question.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub source_text: String,
}

impl Plan {
    /// Builds a plan from steps, renumbering them from 1.
    pub fn from_steps(mut steps: Vec<PlanStep>) -> Self {
        for (i, step) in steps.iter_mut().enumerate() {
            step.index = i + 1;
        }
        let mut plan = Plan { steps, source_text: String::new() };
        plan.source_text = render_plan(&plan);
        plan
    }

    /// Plan consisting of a single review-writing step.
    pub fn review_only() -> Self {
        Self::from_steps(vec![PlanStep::write_review(1)])
    }

    /// Text to hand to a scorer: the planner's original output when known.
    pub fn text(&self) -> String {
        if self.source_text.is_empty() {
            render_plan(self)
        } else {
            self.source_text.clone()
        }
    }

    pub fn structurally_eq(&self, other: &Plan) -> bool {
        self.steps.len() == other.steps.len()
            && self.steps.iter().zip(&other.steps).all(|(a, b)| a.structure() == b.structure())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let steps: Vec<_> = self
            .steps
            .iter()
            .map(|s| {
                serde_json::json!({
                    "index": s.index,
                    "actor": s.actor,
                    "action": s.action,
                    "question": s.question,
                })
            })
            .collect();
        serde_json::json!({ "steps": steps })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, serde_json::Error> {
        let mut plan: Plan = serde_json::from_value(value.clone())?;
        for step in &mut plan.steps {
            if step.text.is_empty() {
                step.text = step.canonical_text();
            }
        }
        if plan.source_text.is_empty() {
            plan.source_text = render_plan(&plan);
        }
        Ok(plan)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanParseError {
    #[error("plan text is empty")]
    Empty,
    #[error("no numbered steps found")]
    NoSteps,
    #[error("step {index}: `{line}` matches no known action")]
    UndefinedAction { index: usize, line: String },
    #[error("step {index}: investigator action without a question")]
    MissingQuestion { index: usize },
    #[error("step {index}: more than one review-writing step")]
    DuplicateReview { index: usize },
}

impl PlanParseError {
    pub fn step_index(&self) -> Option<usize> {
        match self {
            PlanParseError::UndefinedAction { index, .. }
            | PlanParseError::MissingQuestion { index }
            | PlanParseError::DuplicateReview { index } => Some(*index),
            _ => None,
        }
    }
}

static NUMBERED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*(?:[*#]+\s*)?(?:step\s*)?(\d{1,3})\s*[.):]\s*(.*)$").unwrap()
});
static ACTOR_PREFIX: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^(investigator|reviewer|controller|planner)\s*(?:agent)?\s*[:\-|–]\s*(.*)$")
        .unwrap()
});
static PAPER_ACTION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^(?:answer\s+(?:the\s+|a\s+)?question\s+using\s+(?:the\s+)?paper|search\s+(?:in\s+)?the\s+paper\s+to\s+understand)\b(.*)$",
    )
    .unwrap()
});
static WEB_ACTION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^(?:answer\s+(?:the\s+|a\s+)?question\s+using\s+(?:google|the\s+web|web\s+search|a\s+web\s+search|the\s+internet)|search\s+(?:on\s+)?(?:the\s+web|google|the\s+internet)\s+to\s+understand)\b(.*)$",
    )
    .unwrap()
});
static REVIEW_ACTION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:(?:finally|then|lastly|next|and)[,\s]+)*write\b.*\breview\b").unwrap());

#[derive(Debug)]
enum LineParse {
    Step { actor: Actor, action: Action, question: Option<String> },
    Undefined,
}

fn strip_markup(s: &str) -> String {
    s.replace("**", "").replace("__", "").trim().to_string()
}

fn parse_step_body(body: &str) -> LineParse {
    let body = strip_markup(body);
    let (explicit_actor, rest) = match ACTOR_PREFIX.captures(&body) {
        Some(c) => {
            let actor = match c[1].to_lowercase().as_str() {
                "investigator" => Actor::Investigator,
                "reviewer" => Actor::Reviewer,
                _ => Actor::Undefined,
            };
            (Some(actor), c[2].trim().to_string())
        }
        None => (None, body.clone()),
    };
    let (action, tail) = if let Some(c) = PAPER_ACTION.captures(&rest) {
        (Action::AnswerFromPaper, Some(c[1].to_string()))
    } else if let Some(c) = WEB_ACTION.captures(&rest) {
        (Action::AnswerFromWeb, Some(c[1].to_string()))
    } else if REVIEW_ACTION.is_match(&rest) {
        (Action::WriteReview, None)
    } else {
        return LineParse::Undefined;
    };
    let actor = match explicit_actor {
        Some(Actor::Undefined) => return LineParse::Undefined,
        Some(a) => a,
        None => action.expected_actor(),
    };
    let question = tail.and_then(|t| extract_question(&t));
    LineParse::Step { actor, action, question }
}

/// Pulls the question out of the text that follows an investigator action.
fn extract_question(tail: &str) -> Option<String> {
    let folded = crate::text::fold_quotes(tail);
    let mut s = folded.trim().trim_start_matches([':', '-', '–', '|']).trim().to_string();
    // A trailing period after a closing quote: `"What is X?".`
    while s.ends_with('.') && s.len() > 1 && s[..s.len() - 1].ends_with(['"', '\'']) {
        s.pop();
    }
    for quote in ['"', '\''] {
        if s.len() >= 2 && s.starts_with(quote) && s.ends_with(quote) {
            s = s[1..s.len() - 1].trim().to_string();
            break;
        }
    }
    if s.is_empty() {
        return None;
    }
    if !s.ends_with('?') {
        let repaired = format!("{}?", s.trim_end_matches(['.', ';', ',', ':']).trim_end());
        tracing::debug!(question = %s, "appending missing question mark");
        s = repaired;
    }
    Some(s)
}

struct RawLine {
    body: String,
}

/// Splits plan text into numbered step bodies; unnumbered lines after a
/// numbered one are treated as its continuation, lines before the first
/// number are preamble.
fn numbered_lines(text: &str) -> Vec<RawLine> {
    let mut out: Vec<RawLine> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(c) = NUMBERED.captures(line) {
            out.push(RawLine { body: c[2].trim().to_string() });
        } else if let Some(last) = out.last_mut() {
            last.body.push(' ');
            last.body.push_str(line.trim());
        }
    }
    out
}

/// Parses a numbered-list plan.
pub fn parse_plan(text: &str) -> Result<Plan, PlanParseError> {
    if text.trim().is_empty() {
        return Err(PlanParseError::Empty);
    }
    let lines = numbered_lines(text);
    if lines.is_empty() {
        return Err(PlanParseError::NoSteps);
    }
    let mut steps = Vec::with_capacity(lines.len());
    let mut seen_review = false;
    for (i, line) in lines.iter().enumerate() {
        let index = i + 1;
        match parse_step_body(&line.body) {
            LineParse::Undefined => {
                return Err(PlanParseError::UndefinedAction { index, line: line.body.clone() })
            }
            LineParse::Step { actor, action, question } => {
                if action.is_investigation() && question.is_none() {
                    return Err(PlanParseError::MissingQuestion { index });
                }
                if action == Action::WriteReview {
                    if seen_review {
                        return Err(PlanParseError::DuplicateReview { index });
                    }
                    seen_review = true;
                }
                steps.push(PlanStep { index, actor, action, question, text: strip_markup(&line.body) });
            }
        }
    }
    Ok(Plan { steps, source_text: text.to_string() })
}

/// Never-failing parse: unrecognised lines become [`Action::Undefined`]
/// steps. When the text has no numbered lines at all, every non-empty line
/// is treated as a step.
pub fn parse_plan_lenient(text: &str) -> Plan {
    let mut lines = numbered_lines(text);
    if lines.is_empty() {
        lines = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| RawLine { body: l.trim().to_string() })
            .collect();
    }
    let steps = lines
        .iter()
        .enumerate()
        .map(|(i, line)| {
            let (actor, action, question) = match parse_step_body(&line.body) {
                LineParse::Step { actor, action, question } => (actor, action, question),
                LineParse::Undefined => (Actor::Undefined, Action::Undefined, None),
            };
            PlanStep { index: i + 1, actor, action, question, text: strip_markup(&line.body) }
        })
        .collect();
    Plan { steps, source_text: text.to_string() }
}

/// Deterministic numbered-list rendering.
pub fn render_plan(plan: &Plan) -> String {
    plan.steps
        .iter()
        .map(|s| format!("{}. {}", s.index, s.canonical_text()))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuleId {
    R1,
    R2a,
    R2b,
    R2c,
    R3,
}

impl RuleId {
    pub fn is_warning(self) -> bool {
        self == RuleId::R3
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: RuleId,
    /// 1-based step index; 0 for plan-level violations.
    pub step_index: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Valid,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub verdict: Verdict,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.verdict == Verdict::Valid
    }

    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| !v.rule.is_warning())
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.rule.is_warning())
    }

    pub fn rules(&self) -> Vec<RuleId> {
        self.violations.iter().map(|v| v.rule).collect()
    }
}

static JOINED_QUESTIONS: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:and|or|but)\s+(?:also\s+)?(?:how|what|why|which|who|whom|whose|when|where|whether|is|are|was|were|does|do|did|can|could|should|would|will|has|have)\b",
    )
    .unwrap()
});

/// Heuristic single-concept check: flags questions that join two
/// interrogative clauses with a coordinating conjunction, or that contain
/// more than one question.
pub fn asks_multiple_concepts(question: &str) -> bool {
    question.matches('?').count() > 1 || JOINED_QUESTIONS.is_match(question)
}

/// Checks a plan against the planner's golden rules. R3 findings are
/// warnings and do not affect the verdict.
pub fn validate_plan(plan: &Plan) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |rule, step_index, message: String| {
        violations.push(Violation { rule, step_index, message })
    };

    for step in &plan.steps {
        if step.actor == Actor::Undefined || step.action == Action::Undefined {
            push(RuleId::R1, step.index, format!("undefined actor or action: `{}`", step.written_text()));
            continue;
        }
        if step.action.expected_actor() != step.actor {
            push(RuleId::R1, step.index, format!("{:?} cannot perform {:?}", step.actor, step.action));
        }
        match (&step.question, step.action.is_investigation()) {
            (Some(q), true) if q.trim().is_empty() || !q.trim_end().ends_with('?') => {
                push(RuleId::R1, step.index, "investigator question must end with `?`".into())
            }
            (None, true) => push(RuleId::R1, step.index, "investigator step without a question".into()),
            (Some(_), false) => push(RuleId::R1, step.index, "review step carries a question".into()),
            _ => {}
        }
    }

    let mut seen_web = false;
    for step in &plan.steps {
        match step.action {
            Action::AnswerFromWeb => seen_web = true,
            Action::AnswerFromPaper if seen_web => push(
                RuleId::R2a,
                step.index,
                "paper question after a web question".into(),
            ),
            _ => {}
        }
    }

    match plan.steps.last() {
        None => push(RuleId::R2b, 0, "plan has no steps".into()),
        Some(last) => {
            let written = strip_markup(&last.written_text());
            if written != TERMINAL_STEP {
                push(RuleId::R2b, last.index, format!("final step must be exactly `{TERMINAL_STEP}`, found `{written}`"));
            }
        }
    }

    if let Some(pos) = plan.steps.iter().position(|s| s.action == Action::WriteReview) {
        for step in &plan.steps[pos + 1..] {
            if step.action.is_investigation() {
                push(RuleId::R2c, step.index, "investigator step after the review step".into());
            }
        }
    }

    for step in &plan.steps {
        if let (Some(q), true) = (&step.question, step.action.is_investigation()) {
            if asks_multiple_concepts(q) {
                push(RuleId::R3, step.index, "question asks about more than one concept".into());
            }
        }
    }

    let verdict = if violations.iter().any(|v| !v.rule.is_warning()) {
        Verdict::Invalid
    } else {
        Verdict::Valid
    };
    ValidationReport { verdict, violations }
}
