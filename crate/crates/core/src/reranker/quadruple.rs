use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::RerankError;
use crate::aspect::Aspect;
use crate::backend::{BackendError, ChatRequest, LlmClient};
use crate::plan::{parse_plan, Plan};
use crate::prompts::PromptSet;

/// One training unit: an optimal plan and three plans each deficient along
/// one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingQuadruple {
    pub paragraph: String,
    pub optimal: Plan,
    pub lacking_coherence: Plan,
    /// Unstructured output, kept as raw text because it need not parse.
    pub lacking_structure: String,
    pub lacking_specificity: Plan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub gold_review: String,
    pub foreign_review: String,
    pub generic_review: String,
    pub aspect: Aspect,
}

impl RankingQuadruple {
    /// Plan texts in scoring order; the optimal plan is first.
    pub fn plan_texts(&self) -> [String; 4] {
        [
            self.optimal.text(),
            self.lacking_coherence.text(),
            self.lacking_structure.clone(),
            self.lacking_specificity.text(),
        ]
    }

    pub fn read_jsonl(path: &std::path::Path) -> Result<Vec<Self>, RerankError> {
        let text = std::fs::read_to_string(path).map_err(|e| RerankError::Io(format!("{}: {e}", path.display())))?;
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| RerankError::Io(format!("{}:{}: {e}", path.display(), i + 1)))
            })
            .collect()
    }

    pub fn write_jsonl(path: &std::path::Path, quads: &[Self]) -> Result<(), RerankError> {
        let body: String =
            quads.iter().map(|q| serde_json::to_string(q).expect("quadruple serialises") + "\n").collect();
        std::fs::write(path, body).map_err(|e| RerankError::Io(format!("{}: {e}", path.display())))
    }
}

const BUILTIN_GENERIC: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/generic_comments.json"));

/// One generic, paragraph-independent comment per in-scope aspect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GenericCommentCatalog {
    pub comments: BTreeMap<Aspect, String>,
}

impl GenericCommentCatalog {
    pub fn builtin() -> Self {
        serde_json::from_str(BUILTIN_GENERIC).expect("bundled generic comments parse")
    }

    pub fn get(&self, aspect: Aspect) -> Option<&str> {
        self.comments.get(&aspect).map(String::as_str)
    }
}

impl Default for GenericCommentCatalog {
    fn default() -> Self {
        Self::builtin()
    }
}

/// A uniformly drawn index other than `i`.
pub fn foreign_index(i: usize, n: usize, rng: &mut impl Rng) -> Option<usize> {
    if n < 2 {
        return None;
    }
    let j = rng.random_range(0..n - 1);
    Some(if j >= i { j + 1 } else { j })
}

/// The structured and unstructured plan writers.
#[derive(Debug, Clone)]
pub struct PlanGenerators {
    pub llm: LlmClient,
    pub prompts: std::sync::Arc<PromptSet>,
    pub temperature: f64,
}

impl PlanGenerators {
    fn structured(&self, paragraph: &str, review: &str) -> Result<Plan, RerankError> {
        let user = self.prompts.plan_struct_user.render(&[("paragraph", paragraph), ("review", review)])?;
        let request = ChatRequest::new("plan_struct", self.prompts.planner_system.text.clone(), user)
            .with_temperature(self.temperature);
        let mut last_err = None;
        for attempt in 0..2 {
            let text = self.llm.generate(&request)?;
            match parse_plan(&text) {
                Ok(plan) => return Ok(plan),
                Err(err) => {
                    tracing::warn!(attempt, error = %err, "structured plan did not parse");
                    last_err = Some(err);
                }
            }
        }
        Err(RerankError::Backend(BackendError::Unavailable(format!(
            "structured plan unparseable after retry: {}",
            last_err.expect("loop ran")
        ))))
    }

    fn unstructured(&self, paragraph: &str, review: &str) -> Result<String, RerankError> {
        let user = self.prompts.plan_unstruct_user.render(&[("paragraph", paragraph), ("review", review)])?;
        Ok(self.llm.generate(&ChatRequest::new("plan_unstruct", "", user).with_temperature(self.temperature))?)
    }
}

/// Builds the four plans for paragraph `p_i` with gold review `r_i`, using a
/// foreign review `r_j` and the generic comment for `aspect`.
pub fn generate_quadruple(
    generators: &PlanGenerators,
    paragraph: &str,
    gold_review: &str,
    aspect: Aspect,
    foreign_review: &str,
    catalog: &GenericCommentCatalog,
) -> Result<RankingQuadruple, RerankError> {
    let generic = catalog
        .get(aspect)
        .ok_or_else(|| RerankError::Io(format!("no generic comment for aspect {aspect}")))?
        .to_string();
    Ok(RankingQuadruple {
        paragraph: paragraph.into(),
        optimal: generators.structured(paragraph, gold_review)?,
        lacking_coherence: generators.structured(paragraph, foreign_review)?,
        lacking_structure: generators.unstructured(paragraph, gold_review)?,
        lacking_specificity: generators.structured(paragraph, &generic)?,
        provenance: Some(Provenance {
            gold_review: gold_review.into(),
            foreign_review: foreign_review.into(),
            generic_review: generic,
            aspect,
        }),
    })
}
