//! The review loop: candidate plans, re-ranking, controller-supervised plan
//! execution, context filtering and the reviewer.

mod action;
mod review;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use action::{
    first_json_object, parse_agent_action, ActionKind, ActionParseError, ActionSpec, AgentAction, ControlActor,
    ACTION_REGISTRY,
};
pub use review::{parse_review_reply, verify_quote, QuoteCheck, RawReview, Review, ReviewSchemaError};

use crate::backend::{BackendError, ChatRequest, Embedder, LlmClient};
use crate::investigator::{Answer, ChunkIndex, ContextLog, Corpus, Investigator, InvestigatorError, QaPair};
use crate::plan::{parse_plan, Plan, PlanStep};
use crate::prompts::{render_examples, render_review_context, PromptError, PromptSet, ReviewerExample};
use crate::reranker::{select_best, NativeScorer, PlanScorer, RerankError};
use crate::text::{collapse_whitespace, quoted_spans};

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("paragraph is empty")]
    EmptyParagraph,
    #[error("no parseable plan among {attempts} planner replies")]
    NoValidPlan { attempts: usize },
    #[error("controller reply invalid after {attempts} attempts: {last_error}")]
    ControllerFailure { attempts: usize, last_error: String },
    #[error("reviewer reply invalid after {attempts} attempts: {last_error}")]
    ReviewParseFailure { attempts: usize, last_error: String },
    #[error("quote `{quote}` not found in the paragraph (best similarity {similarity:.2})")]
    QuoteNotInParagraph { quote: String, similarity: f64 },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Rerank(#[from] RerankError),
    #[error(transparent)]
    Investigator(#[from] InvestigatorError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Which pipeline variant to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Full pipeline.
    #[default]
    Swif2t,
    /// A single candidate plan, no re-ranking.
    NoRerank,
    /// Reviewer only: no plan, no retrieval.
    Gpt4,
    /// Plan answered from model knowledge, then one cross-check call.
    Cove,
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "swif2t" | "full" => Ok(Variant::Swif2t),
            "no-rerank" | "norerank" => Ok(Variant::NoRerank),
            "gpt4" | "gpt-4" => Ok(Variant::Gpt4),
            "cove" => Ok(Variant::Cove),
            other => Err(format!("unknown baseline `{other}` (expected swif2t, no-rerank, gpt4 or cove)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrchestratorParams {
    pub n_plans: usize,
    pub planner_temperature: f64,
    /// Total controller attempts per step, including the first.
    pub controller_attempts: usize,
    /// Reviewer retries after the first attempt.
    pub reviewer_retries: usize,
    pub quote_similarity: f64,
    pub variant: Variant,
}

impl Default for OrchestratorParams {
    fn default() -> Self {
        OrchestratorParams {
            n_plans: 4,
            planner_temperature: 0.7,
            controller_attempts: 3,
            reviewer_retries: 2,
            quote_similarity: 0.9,
            variant: Variant::Swif2t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum StepOutcome {
    Answered(QaPair),
    Skipped(String),
    Review,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressEntry {
    pub step: PlanStep,
    pub action: AgentAction,
    /// The controller failed and the step ran as written.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degraded: bool,
    pub outcome: StepOutcome,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProgressLog {
    pub entries: Vec<ProgressEntry>,
}

impl ProgressLog {
    /// The `{progress}` slot of the controller prompt.
    pub fn render(&self) -> String {
        if self.entries.is_empty() {
            return "No steps have been completed yet.".into();
        }
        self.entries
            .iter()
            .map(|e| {
                let result = match &e.outcome {
                    StepOutcome::Answered(pair) => match &pair.answer {
                        Answer::Text(t) => t.clone(),
                        Answer::NoAnswer => "No answer was found.".into(),
                    },
                    StepOutcome::Skipped(reason) => format!("Skipped ({reason})."),
                    StepOutcome::Review => "Review written.".into(),
                };
                format!("{}. {}\nResult: {result}", e.step.index, step_text(&e.step))
            })
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

fn step_text(step: &PlanStep) -> String {
    if step.text.is_empty() {
        step.canonical_text()
    } else {
        step.text.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPlan {
    pub plan: Plan,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub variant: Variant,
    pub review: Review,
    pub plan: Plan,
    /// Empty for the reviewer-only variant.
    pub candidate_plans: Vec<ScoredPlan>,
    /// Everything gathered, including unanswered pairs; the reviewer saw
    /// only the answered ones.
    pub context: ContextLog,
    pub progress: ProgressLog,
    /// Digest of the backend calls made during the run.
    pub trace_ref: String,
}

impl RunResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run result serializes")
    }
}

/// Drops unanswered pairs, keeping order.
pub fn filter_context(log: &ContextLog) -> ContextLog {
    ContextLog {
        paragraph: log.paragraph.clone(),
        pairs: log.pairs.iter().filter(|p| !p.answer.is_no_answer()).cloned().collect(),
    }
}

fn with_feedback(user: &str, error: &dyn std::fmt::Display) -> String {
    format!("{user}\n\nYour previous reply was rejected: {error}\nReply again with only the JSON object.")
}

/// Planner, controller and reviewer around one investigator.
#[derive(Clone)]
pub struct Pipeline {
    pub llm: LlmClient,
    pub investigator: Investigator,
    pub scorer: Arc<dyn PlanScorer>,
    pub prompts: Arc<PromptSet>,
    pub examples: Vec<ReviewerExample>,
    pub params: OrchestratorParams,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("params", &self.params)
            .field("investigator", &self.investigator)
            .finish_non_exhaustive()
    }
}

impl Pipeline {
    /// Defaults throughout; the investigator shares `llm`, and plans are
    /// scored by an untrained model (so the first candidate wins).
    pub fn new(llm: LlmClient, embedder: Arc<dyn Embedder>) -> Self {
        Pipeline {
            investigator: Investigator::new(llm.clone(), embedder),
            llm,
            scorer: Arc::new(NativeScorer::default()),
            prompts: Arc::new(PromptSet::builtin()),
            examples: ReviewerExample::builtin(),
            params: OrchestratorParams::default(),
        }
    }

    pub fn with_investigator(mut self, investigator: Investigator) -> Self {
        self.investigator = investigator;
        self
    }

    pub fn with_scorer(mut self, scorer: Arc<dyn PlanScorer>) -> Self {
        self.scorer = scorer;
        self
    }

    pub fn with_prompts(mut self, prompts: Arc<PromptSet>) -> Self {
        self.investigator.prompts = prompts.clone();
        self.prompts = prompts;
        self
    }

    pub fn with_examples(mut self, examples: Vec<ReviewerExample>) -> Self {
        self.examples = examples;
        self
    }

    pub fn with_params(mut self, params: OrchestratorParams) -> Self {
        self.params = params;
        self
    }

    /// `n` planner calls; an unparseable reply is retried once, then
    /// dropped.
    pub fn generate_candidate_plans(&self, paragraph: &str, n: usize) -> Result<Vec<Plan>, OrchestratorError> {
        let user = self.prompts.planner_user.render(&[("paragraph", paragraph)])?;
        let request = ChatRequest::new("planner", self.prompts.planner_system.text.clone(), user)
            .with_temperature(self.params.planner_temperature);
        let mut plans = Vec::with_capacity(n);
        let mut attempts = 0;
        for candidate in 0..n {
            for attempt in 0..2 {
                attempts += 1;
                let reply = self.llm.generate(&request)?;
                match parse_plan(&reply) {
                    Ok(plan) => {
                        plans.push(plan);
                        break;
                    }
                    Err(err) if attempt == 0 => tracing::warn!(candidate, error = %err, "plan unparseable, retrying"),
                    Err(err) => tracing::warn!(candidate, error = %err, "plan unparseable after retry, dropped"),
                }
            }
        }
        if plans.is_empty() {
            return Err(OrchestratorError::NoValidPlan { attempts });
        }
        Ok(plans)
    }

    /// Asks the controller how to carry out `next_step`.
    pub fn controller_decide(
        &self,
        paragraph: &str,
        progress: &ProgressLog,
        remaining: &[PlanStep],
        next_step: &PlanStep,
    ) -> Result<AgentAction, OrchestratorError> {
        let steps = if remaining.is_empty() {
            "None.".to_string()
        } else {
            remaining.iter().map(|s| format!("{}. {}", s.index, step_text(s))).collect::<Vec<_>>().join("\n")
        };
        let next = format!("{}. {}", next_step.index, step_text(next_step));
        let progress_text = progress.render();
        let user = self.prompts.controller_user.render(&[
            ("paragraph", paragraph),
            ("progress", &progress_text),
            ("steps", &steps),
            ("next step", &next),
        ])?;
        let system = self.prompts.controller_system.text.clone();
        let attempts = self.params.controller_attempts.max(1);
        let mut prompt = user.clone();
        let mut last_error = String::new();
        for attempt in 0..attempts {
            let reply = self.llm.generate(&ChatRequest::new("controller", system.clone(), prompt.clone()))?;
            match parse_agent_action(&reply) {
                Ok(action) => return Ok(action),
                Err(err) => {
                    tracing::warn!(attempt, step = next_step.index, error = %err, "controller reply rejected");
                    prompt = with_feedback(&user, &err);
                    last_error = err.to_string();
                }
            }
        }
        Err(OrchestratorError::ControllerFailure { attempts, last_error })
    }

    /// Calls the reviewer on the answered context and verifies the quote.
    pub fn write_review(&self, paragraph: &str, context: &ContextLog) -> Result<Review, OrchestratorError> {
        let rendered = render_review_context(paragraph, context.answered());
        let examples = render_examples(&self.examples);
        let user = self
            .prompts
            .reviewer_user
            .render(&[("context", &rendered), ("in-context learning examples", &examples)])?;
        let system = self.prompts.reviewer_system.text.clone();
        let attempts = self.params.reviewer_retries + 1;
        let mut prompt = user.clone();
        let mut last_error = String::new();
        for attempt in 0..attempts {
            let reply = self.llm.generate(&ChatRequest::new("reviewer", system.clone(), prompt.clone()))?;
            let raw = match parse_review_reply(&reply) {
                Ok(raw) => raw,
                Err(err) => {
                    tracing::warn!(attempt, error = %err, "reviewer reply rejected");
                    prompt = with_feedback(&user, &err);
                    last_error = err.to_string();
                    continue;
                }
            };
            let spans = quoted_spans(&raw.review);
            let candidates: Vec<&str> = match &raw.quote {
                Some(q) => vec![q.as_str()],
                None => spans.iter().map(String::as_str).collect(),
            };
            return match verify_quote(paragraph, candidates, self.params.quote_similarity) {
                QuoteCheck::Verified { quote, .. } => Ok(Review {
                    quoted_substring: quote,
                    label: raw.label,
                    review_text: raw.review,
                    reasoning: raw.reasoning,
                }),
                QuoteCheck::Rejected { candidate, similarity } => {
                    Err(OrchestratorError::QuoteNotInParagraph { quote: candidate, similarity })
                }
            };
        }
        Err(OrchestratorError::ReviewParseFailure { attempts, last_error })
    }

    /// One extra call that re-checks closed-book answers; unanswerable ones
    /// become `NoAnswer`. Pairs missing from the reply keep their answer.
    pub fn cross_check(&self, context: &mut ContextLog) -> Result<(), OrchestratorError> {
        let listed: Vec<String> = context.answered().map(|(q, a)| format!("{q}\n* {a}")).collect();
        if listed.is_empty() {
            return Ok(());
        }
        let user = self.prompts.cross_check_user.render(&[("context", &listed.join("\n\n"))])?;
        let reply = self.llm.generate(&ChatRequest::new("cross_check", "", user))?;
        let mut revised = Vec::new();
        let mut question: Option<String> = None;
        for line in reply.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(answer) = line.strip_prefix("* ").or_else(|| line.strip_prefix("- ")) {
                if let Some(q) = question.take() {
                    revised.push((q, answer.to_string()));
                }
            } else {
                question = Some(collapse_whitespace(line).to_lowercase());
            }
        }
        for pair in context.pairs.iter_mut().filter(|p| !p.answer.is_no_answer()) {
            let key = collapse_whitespace(&pair.question).to_lowercase();
            if let Some((_, answer)) = revised.iter().find(|(q, _)| *q == key) {
                pair.answer = Answer::from_reply(answer);
            }
        }
        Ok(())
    }

    fn dispatch(&self, action: &AgentAction, paper: &ChunkIndex) -> Result<StepOutcome, OrchestratorError> {
        let question = action.question().unwrap_or_default();
        let result = match (action.action, self.params.variant) {
            (ActionKind::SkipStep, _) => return Ok(StepOutcome::Skipped(action.explanation.clone())),
            (ActionKind::WriteReview, _) => return Ok(StepOutcome::Review),
            (_, Variant::Cove) => self.investigator.answer_closed_book(question),
            (ActionKind::AnswerFromPaper, _) => self.investigator.answer_from_paper(question, paper),
            (ActionKind::AnswerFromWeb, _) => self.investigator.answer_from_web(question),
        };
        match result {
            Ok(pair) => Ok(StepOutcome::Answered(pair)),
            Err(InvestigatorError::Backend(err @ BackendError::BudgetExceeded(_))) => Err(err.into()),
            Err(err) => {
                tracing::warn!(question, error = %err, "investigator failed, step skipped");
                Ok(StepOutcome::Skipped(format!("investigator failed: {err}")))
            }
        }
    }

    fn execute(&self, paragraph: &str, plan: &Plan, paper: &ChunkIndex) -> Result<(ContextLog, ProgressLog), OrchestratorError> {
        let mut context = ContextLog::new(paragraph);
        let mut progress = ProgressLog::default();
        for (i, step) in plan.steps.iter().enumerate() {
            let (action, degraded) = match self.controller_decide(paragraph, &progress, &plan.steps[i + 1..], step) {
                Ok(action) => (action, false),
                Err(OrchestratorError::ControllerFailure { attempts, last_error }) => {
                    tracing::warn!(step = step.index, attempts, %last_error, "controller failed, executing step literally");
                    (AgentAction::literal(step), true)
                }
                Err(err) => return Err(err),
            };
            let outcome = self.dispatch(&action, paper)?;
            if let StepOutcome::Answered(pair) = &outcome {
                context.pairs.push(pair.clone());
            }
            let done = outcome == StepOutcome::Review;
            progress.entries.push(ProgressEntry { step: step.clone(), action, degraded, outcome });
            if done {
                break;
            }
        }
        Ok((context, progress))
    }

    /// Runs the configured variant on `paragraph` against an indexed paper.
    pub fn run_review_indexed(&self, paragraph: &str, paper: &ChunkIndex) -> Result<RunResult, OrchestratorError> {
        if paragraph.trim().is_empty() {
            return Err(OrchestratorError::EmptyParagraph);
        }
        let trace_start = self.llm.trace().len();
        let variant = self.params.variant;

        let (plan, candidate_plans, mut context, progress) = if variant == Variant::Gpt4 {
            let plan = Plan::review_only();
            let step = plan.steps[0].clone();
            let progress = ProgressLog {
                entries: vec![ProgressEntry {
                    action: AgentAction::literal(&step),
                    step,
                    degraded: false,
                    outcome: StepOutcome::Review,
                }],
            };
            (plan, Vec::new(), ContextLog::new(paragraph), progress)
        } else {
            let n = if variant == Variant::NoRerank { 1 } else { self.params.n_plans.max(1) };
            let plans = self.generate_candidate_plans(paragraph, n)?;
            let texts: Vec<String> = plans.iter().map(Plan::text).collect();
            let (best, scores) = select_best(self.scorer.as_ref(), paragraph, &texts)?;
            let plan = plans[best].clone();
            let scored = plans.into_iter().zip(scores).map(|(plan, score)| ScoredPlan { plan, score }).collect();
            let (context, progress) = self.execute(paragraph, &plan, paper)?;
            (plan, scored, context, progress)
        };

        if variant == Variant::Cove {
            self.cross_check(&mut context)?;
        }
        let review = self.write_review(paragraph, &filter_context(&context))?;
        Ok(RunResult {
            variant,
            review,
            plan,
            candidate_plans,
            context,
            progress,
            trace_ref: self.llm.trace().digest(trace_start),
        })
    }

    /// Indexes `paper` and runs the pipeline. The reviewer-only and
    /// closed-book variants never read the paper.
    pub fn run_review(&self, paragraph: &str, paper: &Corpus) -> Result<RunResult, OrchestratorError> {
        let index = match self.params.variant {
            Variant::Gpt4 | Variant::Cove => ChunkIndex::default(),
            _ => paper.index(self.investigator.embedder.as_ref(), &self.investigator.params)?,
        };
        self.run_review_indexed(paragraph, &index)
    }
}

#[cfg(test)]
mod tests;
