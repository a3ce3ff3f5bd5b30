//! Plan re-ranking: a pointwise scorer `f(paragraph, plan)` trained with a
//! pairwise cross-entropy objective on (optimal, deficient) plan pairs.

mod features;
mod quadruple;
mod synthetic;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use features::{jaccard, Featurizer, EXTRACTOR_VERSION, FEATURE_NAMES, N_FEATURES};
pub use quadruple::{
    generate_quadruple, foreign_index, GenericCommentCatalog, PlanGenerators, Provenance, RankingQuadruple,
};
pub use synthetic::synthetic_corpus;
pub use train::{
    featurize_corpus, fit, loss_and_gradient, ranking_loss, split_train_validation, train, EpochStats, FeaturizedQuadruple,
    TrainParams, TrainReport,
};

use crate::text::fnv1a64;

#[derive(Debug, thiserror::Error)]
pub enum RerankError {
    #[error("no candidate plans to rank")]
    NoCandidates,
    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    DivergenceDetected { epoch: usize, loss: f64 },
    #[error("model expects features {expected:?} from extractor `{expected_version}`")]
    IncompatibleModel { expected: Vec<String>, expected_version: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("external scorer: {0}")]
    External(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Backend(#[from] crate::backend::BackendError),
    #[error(transparent)]
    Prompt(#[from] crate::prompts::PromptError),
}

/// Anything that assigns a real score to a plan for a paragraph.
pub trait PlanScorer: Send + Sync {
    fn score(&self, paragraph: &str, plan_text: &str) -> Result<f64, RerankError>;
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Probability that plan i outranks plan j given their scores.
pub fn pairwise_prob(f_i: f64, f_j: f64) -> f64 {
    sigmoid(f_i - f_j)
}

/// Linear scoring function over [`FEATURE_NAMES`]; serialises to the model
/// file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearModel {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub extractor_version: String,
}

impl Default for LinearModel {
    fn default() -> Self {
        Self::zeros()
    }
}

impl LinearModel {
    /// The uninformative model: every plan scores 0.
    pub fn zeros() -> Self {
        LinearModel {
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            weights: vec![0.0; N_FEATURES],
            bias: 0.0,
            extractor_version: EXTRACTOR_VERSION.to_string(),
        }
    }

    pub fn with_weights(weights: [f64; N_FEATURES], bias: f64) -> Self {
        LinearModel { weights: weights.to_vec(), bias, ..Self::zeros() }
    }

    pub fn score_features(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn check_compatible(&self) -> Result<(), RerankError> {
        let expected = LinearModel::zeros();
        if self.feature_names != expected.feature_names
            || self.weights.len() != N_FEATURES
            || self.extractor_version != EXTRACTOR_VERSION
        {
            return Err(RerankError::IncompatibleModel {
                expected: expected.feature_names,
                expected_version: expected.extractor_version,
            });
        }
        if !self.bias.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(RerankError::External("model parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RerankError> {
        let text = std::fs::read_to_string(path).map_err(|e| RerankError::Io(format!("{}: {e}", path.display())))?;
        let model: LinearModel =
            serde_json::from_str(&text).map_err(|e| RerankError::Io(format!("{}: {e}", path.display())))?;
        model.check_compatible()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), RerankError> {
        let text = serde_json::to_string_pretty(self).expect("model serialises");
        std::fs::write(path, text + "\n").map_err(|e| RerankError::Io(format!("{}: {e}", path.display())))
    }
}

/// A [`LinearModel`] together with the feature extractor it was trained on.
#[derive(Debug, Clone, Default)]
pub struct NativeScorer {
    pub model: LinearModel,
    pub featurizer: Featurizer,
}

impl NativeScorer {
    pub fn new(model: LinearModel) -> Self {
        NativeScorer { model, featurizer: Featurizer::default() }
    }
}

impl PlanScorer for NativeScorer {
    fn score(&self, paragraph: &str, plan_text: &str) -> Result<f64, RerankError> {
        Ok(self.model.score_features(&self.featurizer.extract(paragraph, plan_text)))
    }
}

/// Scores drawn uniformly from [0, 1) by hashing the inputs with a seed.
/// Stands in for an untrained model whose ranking is arbitrary.
#[derive(Debug, Clone, Copy)]
pub struct RandomScorer {
    pub seed: u64,
}

impl PlanScorer for RandomScorer {
    fn score(&self, paragraph: &str, plan_text: &str) -> Result<f64, RerankError> {
        let mut key = self.seed.to_le_bytes().to_vec();
        key.extend_from_slice(paragraph.as_bytes());
        key.push(0x1f);
        key.extend_from_slice(plan_text.as_bytes());
        let h = fnv1a64(&key);
        // splitmix finaliser decorrelates nearby seeds
        let mut z = h.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        Ok((z >> 11) as f64 / (1u64 << 53) as f64)
    }
}

/// Delegates scoring over HTTP: `POST {paragraph, plan}` returning `{score}`.
#[derive(Debug, Clone)]
pub struct ExternalScorer {
    pub url: String,
    client: reqwest::blocking::Client,
}

impl ExternalScorer {
    pub fn new(url: &str) -> Result<Self, RerankError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(60))
            .build()
            .map_err(|e| RerankError::External(e.to_string()))?;
        Ok(ExternalScorer { url: url.into(), client })
    }
}

#[derive(Deserialize)]
struct ScoreResponse {
    score: f64,
}

impl PlanScorer for ExternalScorer {
    fn score(&self, paragraph: &str, plan_text: &str) -> Result<f64, RerankError> {
        let response = self
            .client
            .post(&self.url)
            .json(&serde_json::json!({"paragraph": paragraph, "plan": plan_text}))
            .send()
            .map_err(|e| RerankError::External(e.to_string()))?;
        if !response.status().is_success() {
            return Err(RerankError::External(format!("scorer returned {}", response.status())));
        }
        let body: ScoreResponse = response.json().map_err(|e| RerankError::External(e.to_string()))?;
        if !body.score.is_finite() {
            return Err(RerankError::External("scorer returned a non-finite score".into()));
        }
        Ok(body.score)
    }
}

/// Index of the first maximal score.
pub fn argmax_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if best.is_none_or(|b| *s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Scores every candidate and picks the highest, preferring the earliest on
/// ties.
pub fn select_best(
    scorer: &dyn PlanScorer,
    paragraph: &str,
    plan_texts: &[String],
) -> Result<(usize, Vec<f64>), RerankError> {
    let scores = plan_texts.iter().map(|p| scorer.score(paragraph, p)).collect::<Result<Vec<_>, _>>()?;
    let best = argmax_first(&scores).ok_or(RerankError::NoCandidates)?;
    Ok((best, scores))
}

/// Credit for ranking the optimal plan (index 0) first. A tie at the top
/// shares the credit equally, so an uninformative scorer earns 1/4 on
/// quadruples.
pub fn top1_credit(scores: &[f64]) -> f64 {
    let Some(&top) = scores.iter().max_by(|a, b| a.total_cmp(b)) else {
        return 0.0;
    };
    if scores[0] < top {
        return 0.0;
    }
    1.0 / scores.iter().filter(|s| **s == top).count() as f64
}

/// Fraction of quadruples whose optimal plan scores highest.
pub fn recall_at_1(scorer: &dyn PlanScorer, quadruples: &[RankingQuadruple]) -> Result<f64, RerankError> {
    if quadruples.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for q in quadruples {
        let scores =
            q.plan_texts().iter().map(|p| scorer.score(&q.paragraph, p)).collect::<Result<Vec<_>, _>>()?;
        total += top1_credit(&scores);
    }
    Ok(total / quadruples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    struct Fixed(Vec<f64>);
    impl PlanScorer for Fixed {
        fn score(&self, _p: &str, plan: &str) -> Result<f64, RerankError> {
            Ok(self.0[plan.parse::<usize>().unwrap()])
        }
    }

    fn texts(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    #[test]
    fn pairwise_probability_examples() {
        assert_eq!(pairwise_prob(1.3, 1.3), 0.5);
        assert!((pairwise_prob(3f64.ln(), 0.0) - 0.75).abs() < 1e-15);
        assert!((softplus(-800.0)).abs() < 1e-300);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
    }

    #[test]
    fn select_best_tie_breaks_to_first() {
        let (best, scores) = select_best(&Fixed(vec![0.2, 0.9, 0.9]), "p", &texts(3)).unwrap();
        assert_eq!(best, 1);
        assert_eq!(scores, [0.2, 0.9, 0.9]);
        assert_eq!(select_best(&Fixed(vec![-4.0]), "p", &texts(1)).unwrap().0, 0);
        assert!(matches!(select_best(&Fixed(vec![]), "p", &[]), Err(RerankError::NoCandidates)));
    }

    #[test]
    fn top1_credit_examples() {
        assert_eq!(top1_credit(&[1.0, 0.0, 0.0, 0.0]), 1.0);
        assert_eq!(top1_credit(&[0.0, 1.0, 0.0, 0.0]), 0.0);
        assert_eq!(top1_credit(&[0.0; 4]), 0.25);
        let hand = [[1.0, 0.0, 0.0, 0.0], [2.0, 1.0, 1.0, 0.0], [0.5, 0.1, 0.2, 0.3], [0.0, 1.0, 0.0, 0.0]];
        let r: f64 = hand.iter().map(|s| top1_credit(s)).sum::<f64>() / 4.0;
        assert_eq!(r, 0.75);
    }

    #[test]
    fn random_scorer_is_deterministic_and_uniform() {
        let s = RandomScorer { seed: 7 };
        assert_eq!(s.score("p", "x").unwrap(), s.score("p", "x").unwrap());
        let v: Vec<f64> = (0..10_000).map(|i| s.score("p", &i.to_string()).unwrap()).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean - 0.5).abs() < 0.02);
        assert!(v.iter().all(|x| (0.0..1.0).contains(x)));
    }

    #[test]
    fn model_file_round_trips_and_rejects_foreign_features() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = LinearModel::with_weights([1.0, -2.0, 0.5, 0.0, 0.0, 3.0, 0.0, 0.0, 0.1, -1.0], 0.3);
        m.save(&path).unwrap();
        assert_eq!(LinearModel::load(&path).unwrap(), m);
        let mut bad = m.clone();
        bad.feature_names[0] = "other".into();
        bad.save(&path).unwrap();
        assert!(matches!(LinearModel::load(&path), Err(RerankError::IncompatibleModel { .. })));
    }

    proptest! {
        #[test]
        fn antisymmetry(a in -50.0f64..50.0, b in -50.0f64..50.0) {
            prop_assert!((pairwise_prob(a, b) + pairwise_prob(b, a) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn argmax_invariant_under_monotone_maps(scores in prop::collection::vec(-10.0f64..10.0, 1..12), c in -5.0f64..5.0) {
            let base = argmax_first(&scores);
            let shifted: Vec<f64> = scores.iter().map(|s| s + c).collect();
            let cubed: Vec<f64> = scores.iter().map(|s| s.powi(3)).collect();
            let squashed: Vec<f64> = scores.iter().map(|s| sigmoid(*s)).collect();
            prop_assert_eq!(argmax_first(&shifted), base);
            prop_assert_eq!(argmax_first(&cubed), base);
            prop_assert_eq!(argmax_first(&squashed), base);
        }
    }
}
