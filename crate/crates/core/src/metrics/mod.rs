//! Automatic metrics and human-judgment statistics.

mod aspect;
mod human;
mod text;

use serde::{Deserialize, Serialize};

pub use aspect::{aspect_scores, AspectReport, ClassScore};
pub use human::{
    agreement_pairs, cohen_kappa, dominance, kappa, read_judgments, systems_in, tie_rate, write_judgments, ComparisonJudgment,
    Criterion, DominanceTable, Outcome, PresentationOrder, TieHandling,
};
pub use text::{align, bleu4, chunks, meteor, rouge_l, Smoothing};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("candidate is empty")]
    EmptyCandidate,
    #[error("no items to score")]
    Empty,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("expected agreement is 1, kappa undefined")]
    DegenerateDistribution,
    #[error("annotator {annotator_id} judged {pair:?} on {example_id} twice")]
    DuplicateJudgment { example_id: String, annotator_id: String, pair: (String, String) },
    #[error("system `{0}` is not in the table")]
    UnknownSystem(String),
    #[error("system `{0}` compared with itself")]
    SelfComparison(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Mean sentence-level scores for one system, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TextScores {
    pub meteor: f64,
    pub bleu4: f64,
    pub rouge_l: f64,
}

/// Averages the three metrics over (candidate, reference) pairs, using the
/// shared word tokenizer.
pub fn text_scores<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>, smoothing: Smoothing) -> Result<TextScores, MetricError> {
    let mut sum = TextScores::default();
    let mut n = 0usize;
    for (cand, reference) in pairs {
        let c = crate::text::tokenize(cand);
        let r = crate::text::tokenize(reference);
        sum.meteor += meteor(&c, &r);
        sum.bleu4 += bleu4(&c, &[&r], smoothing)?;
        sum.rouge_l += rouge_l(&c, &r);
        n += 1;
    }
    if n == 0 {
        return Err(MetricError::Empty);
    }
    let n = n as f64;
    Ok(TextScores { meteor: sum.meteor / n, bleu4: sum.bleu4 / n, rouge_l: sum.rouge_l / n })
}
