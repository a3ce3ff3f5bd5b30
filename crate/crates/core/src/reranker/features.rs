use std::collections::BTreeSet;
use std::sync::Arc;

use crate::backend::{cosine, Embedder, HashEmbedder};
use crate::plan::{parse_plan_lenient, validate_plan, Action, RuleId, TERMINAL_STEP};
use crate::text::{collapse_whitespace, content_words};

pub const EXTRACTOR_VERSION: &str = "plan-features-v1";

pub const FEATURE_NAMES: [&str; 10] = [
    "grammar_fraction",
    "r1_violations",
    "r2_violations",
    "terminal_exact",
    "paper_before_web",
    "content_jaccard",
    "mean_question_cosine",
    "max_question_cosine",
    "plan_length",
    "duplicate_questions",
];

pub const N_FEATURES: usize = FEATURE_NAMES.len();

/// Maps (paragraph, plan text) to a fixed-order feature vector.
#[derive(Clone)]
pub struct Featurizer {
    embedder: Arc<dyn Embedder>,
}

impl std::fmt::Debug for Featurizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Featurizer").field("dim", &self.embedder.dim()).finish()
    }
}

impl Default for Featurizer {
    fn default() -> Self {
        Featurizer { embedder: Arc::new(HashEmbedder::default()) }
    }
}

impl Featurizer {
    pub fn new(embedder: Arc<dyn Embedder>) -> Self {
        Featurizer { embedder }
    }

    pub fn extract(&self, paragraph: &str, plan_text: &str) -> [f64; N_FEATURES] {
        let plan = parse_plan_lenient(plan_text);
        let n = plan.steps.len();
        let defined = plan.steps.iter().filter(|s| s.action != Action::Undefined).count();
        let report = validate_plan(&plan);
        let count = |pred: fn(RuleId) -> bool| report.errors().filter(|v| pred(v.rule)).count() as f64;
        let r1 = count(|r| r == RuleId::R1);
        let r2 = count(|r| matches!(r, RuleId::R2a | RuleId::R2b | RuleId::R2c));
        let r2a = count(|r| r == RuleId::R2a);
        let terminal = plan
            .steps
            .last()
            .is_some_and(|s| s.action == Action::WriteReview && collapse_whitespace(&s.text) == TERMINAL_STEP);

        let questions: Vec<&str> = plan.steps.iter().filter_map(|s| s.question.as_deref()).collect();
        let question_text = if questions.is_empty() {
            plan.steps.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ")
        } else {
            questions.join(" ")
        };
        let jaccard = jaccard(&content_words(&question_text), &content_words(paragraph));

        let (mean_cos, max_cos) = self.question_cosines(paragraph, &questions);

        let mut seen = BTreeSet::new();
        let duplicates = questions.iter().filter(|q| !seen.insert(collapse_whitespace(&q.to_lowercase()))).count();

        [
            if n == 0 { 0.0 } else { defined as f64 / n as f64 },
            r1,
            r2,
            f64::from(u8::from(terminal)),
            f64::from(u8::from(r2a == 0.0)),
            jaccard,
            mean_cos,
            max_cos,
            n as f64 / 10.0,
            duplicates as f64,
        ]
    }

    fn question_cosines(&self, paragraph: &str, questions: &[&str]) -> (f64, f64) {
        let Ok(p) = self.embedder.embed(paragraph) else {
            return (0.0, 0.0);
        };
        let sims: Vec<f64> = questions
            .iter()
            .filter_map(|q| self.embedder.embed(q).ok())
            .map(|q| cosine(&p, &q))
            .collect();
        if sims.is_empty() {
            return (0.0, 0.0);
        }
        let mean = sims.iter().sum::<f64>() / sims.len() as f64;
        let max = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (mean, max)
    }
}

pub fn jaccard(a: &[String], b: &[String]) -> f64 {
    let a: BTreeSet<&String> = a.iter().collect();
    let b: BTreeSet<&String> = b.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        0.0
    } else {
        a.intersection(&b).count() as f64 / union as f64
    }
}
