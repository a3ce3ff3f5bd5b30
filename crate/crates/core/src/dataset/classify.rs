use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::aspect::Aspect;
use crate::text::{fold_quotes, quoted_spans};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CommunicativePurpose {
    Recap,
    Strength,
    Todo,
    Weakness,
    Structure,
    Other,
}

impl CommunicativePurpose {
    pub const ALL: [CommunicativePurpose; 6] = [
        CommunicativePurpose::Recap,
        CommunicativePurpose::Strength,
        CommunicativePurpose::Todo,
        CommunicativePurpose::Weakness,
        CommunicativePurpose::Structure,
        CommunicativePurpose::Other,
    ];

    /// Purposes kept by the compiler.
    pub fn is_actionable(self) -> bool {
        matches!(self, CommunicativePurpose::Weakness | CommunicativePurpose::Todo)
    }
}

impl fmt::Display for CommunicativePurpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for CommunicativePurpose {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown communicative purpose `{s}`"))
    }
}

fn re(pattern: &str) -> Regex {
    Regex::new(&format!("(?i){pattern}")).expect("valid cue regex")
}

/// Cue lexicons in decision order: the first purpose with any cue wins.
static PURPOSE_CUES: LazyLock<Vec<(CommunicativePurpose, Regex)>> = LazyLock::new(|| {
    use CommunicativePurpose::*;
    vec![
        (
            Weakness,
            re(r"\b(lacks?|lacking|fail(s|ed)? to|missing|insufficient(ly)?|unclear|not (clear|fair|convincing|justified|sufficient|enough)|unfair|unconvincing|questionable|flaw(s|ed)?|weak(ness|nesses)?|problem(s|atic)?|concern(s|ed)?|incorrect|wrong|overclaim\w*|limited|does not|doesn't|did not|didn't|no evidence|without any)\b"),
        ),
        (
            Todo,
            re(r"(\b(should|please|suggest\w*|recommend\w*|consider(ing)?|encourage|need(s)? to|must|would (help|benefit|be (good|nice|useful|better)))\b|^\s*(add|include|clarify|discuss|explain|provide|report|compare|cite|show)\b)"),
        ),
        (
            Recap,
            re(r"\b(this (paper|work|manuscript|submission) (presents|proposes|introduces|describes|studies|investigates)|the authors (propose|present|introduce|describe|study)|in this (paper|work)|summar(y|ize|ise)s?)\b"),
        ),
        (
            Strength,
            re(r"\b(excellent|thorough(ly)?|well[- ](written|motivated|organi[sz]ed|executed)|strong|impressive|convincing|interesting|nice(ly)?|good|great|commend\w*|solid|elegant|clearly written)\b"),
        ),
        (Structure, re(r"^\s*((minor|major) (comments|issues|points|remarks)|section \d+|strengths|weaknesses|questions|summary)\s*:")),
    ]
});

/// Cue lexicons in tie-break order.
static ASPECT_CUES: LazyLock<Vec<(Aspect, Regex)>> = LazyLock::new(|| {
    use Aspect::*;
    vec![
        (Clarity, re(r"\b(not clear|unclear|clarif\w*|confus\w*|hard to (follow|read|understand)|ambigu\w*|typos?|readab\w*|well[- ]written|wording|phras\w*)\b")),
        (Replicability, re(r"\b(reproduc\w*|replica\w*|hyper-?parameters?|implementation details?|source code|code release|release the code|random seeds?|training details|more details)\b")),
        (MeaningfulComparison, re(r"\b(baselines?|compar\w*|state[- ]of[- ]the[- ]art|prior work|related work|existing (methods|approaches|work)|versus|vs\.?)\b")),
        (Originality, re(r"\b(novel\w*|incremental|original\w*|already (been )?(explored|proposed|studied|known)|not new|prior art)\b")),
        (Soundness, re(r"\b(statistic\w*|significan\w*|evidence|proofs?|justif\w*|sound\w*|assumptions?|variance|confidence intervals?|rigou?r\w*|valid\w*|correctness|not fair|unfair|overclaim\w*)\b")),
        (Substance, re(r"\b(more experiments|additional (experiments|results|analysis)|ablations?|depth|shallow|in-depth|further analysis|metrics?|more (results|analysis|datasets)|substance|only one dataset)\b")),
        (Motivation, re(r"\b(motivat\w*|why (is|do|does|would|should)|importance|the purpose of)\b")),
        (Summary, re(r"\b(this (paper|work) (presents|proposes|introduces|describes)|the authors (propose|present|introduce)|summar\w*)\b")),
    ]
});

/// Drops quoted spans, so that cue words inside quoted paper text do not
/// count towards the reviewer's intent.
fn without_quotes(text: &str) -> String {
    let mut out = fold_quotes(text);
    for span in quoted_spans(text) {
        out = out.replace(&span, " ");
    }
    out
}

/// Cue-lexicon purpose baseline. Test stand-in only.
pub fn rule_based_purpose(review: &str) -> CommunicativePurpose {
    let text = without_quotes(review);
    PURPOSE_CUES
        .iter()
        .find(|(_, cue)| cue.is_match(&text))
        .map(|(p, _)| *p)
        .unwrap_or(CommunicativePurpose::Other)
}

/// Cue-count aspect baseline: most cue hits wins, ties follow lexicon
/// order, no hits gives Substance. Test stand-in only.
pub fn rule_based_aspect(review: &str) -> Aspect {
    let text = without_quotes(review);
    let mut best = (Aspect::Substance, 0);
    for (aspect, cue) in ASPECT_CUES.iter() {
        let hits = cue.find_iter(&text).count();
        if hits > best.1 {
            best = (*aspect, hits);
        }
    }
    best.0
}

/// HTTP classifier: `POST {"text": ...}` returning `{"label": ...}`.
#[derive(Debug, Clone)]
pub struct ExternalClassifier {
    pub url: String,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct LabelResponse {
    label: String,
}

impl ExternalClassifier {
    pub fn new(url: &str) -> Result<Self, DatasetError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(30))
            .build()
            .map_err(|e| DatasetError::ExternalClassifierUnavailable(e.to_string()))?;
        Ok(ExternalClassifier { url: url.into(), client })
    }

    fn label(&self, text: &str) -> Result<String, DatasetError> {
        let unavailable = |e: reqwest::Error| DatasetError::ExternalClassifierUnavailable(format!("{}: {e}", self.url));
        let response = self.client.post(&self.url).json(&serde_json::json!({ "text": text })).send().map_err(unavailable)?;
        if !response.status().is_success() {
            return Err(DatasetError::ExternalClassifierUnavailable(format!("{} returned {}", self.url, response.status())));
        }
        Ok(response.json::<LabelResponse>().map_err(unavailable)?.label)
    }
}

/// Which classifier answers a question about a review.
#[derive(Debug, Clone)]
pub enum ClassifierHandle {
    RuleBased,
    External(ExternalClassifier),
}

impl ClassifierHandle {
    pub fn external(url: &str) -> Result<Self, DatasetError> {
        Ok(ClassifierHandle::External(ExternalClassifier::new(url)?))
    }

    pub fn classify_purpose(&self, review: &str) -> Result<CommunicativePurpose, DatasetError> {
        match self {
            ClassifierHandle::RuleBased => Ok(rule_based_purpose(review)),
            ClassifierHandle::External(c) => {
                let label = c.label(review)?;
                label.parse().map_err(DatasetError::BadLabel)
            }
        }
    }

    pub fn classify_aspect(&self, review: &str) -> Result<Aspect, DatasetError> {
        match self {
            ClassifierHandle::RuleBased => Ok(rule_based_aspect(review)),
            ClassifierHandle::External(c) => {
                let label = c.label(review)?;
                label.parse().map_err(|e: crate::aspect::UnknownAspect| DatasetError::BadLabel(e.to_string()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use CommunicativePurpose::*;

    #[test]
    fn purpose_examples() {
        assert_eq!(rule_based_purpose("The authors should discuss this issue in more depth."), Todo);
        assert_eq!(rule_based_purpose("This paper presents a method for graph matching."), Recap);
        assert_eq!(rule_based_purpose("Excellent and thorough evaluation."), Strength);
        assert_eq!(rule_based_purpose("The statement \"RL methods optimize for short-term returns\" is not fair."), Weakness);
        assert_eq!(rule_based_purpose("Minor comments:"), Structure);
        assert_eq!(rule_based_purpose("Table 3."), Other);
    }

    #[test]
    fn quoted_text_does_not_leak_cues() {
        assert_eq!(rule_based_purpose("Excellent point: \"the baseline should fail on long inputs\"."), Strength);
    }

    #[test]
    fn aspect_examples() {
        let gold = "The authors state that GF-SVM \"demonstrated a significant performance improvement over the existing models in this domain.\" \
                    However, the authors have failed to perform any sort of statistical analysis to demonstrate that their method is \
                    significantly better, or even different from, the established methods.";
        assert_eq!(rule_based_aspect(gold), Aspect::Soundness);
        assert_eq!(
            rule_based_aspect("More details about the training procedure would help in ensuring replicability of the experiment."),
            Aspect::Replicability
        );
        assert_eq!(rule_based_aspect("The statement 'Types of noise are modelled jointly' is not clear."), Aspect::Clarity);
        assert_eq!(rule_based_aspect("The idea is incremental and not novel."), Aspect::Originality);
        assert_eq!(rule_based_aspect("Please compare against stronger baselines."), Aspect::MeaningfulComparison);
        assert_eq!(rule_based_aspect("Nothing to flag."), Aspect::Substance);
    }

    #[test]
    fn purpose_labels_parse() {
        for p in CommunicativePurpose::ALL {
            assert_eq!(p.to_string().to_lowercase().parse::<CommunicativePurpose>(), Ok(p));
        }
        assert!("Praise".parse::<CommunicativePurpose>().is_err());
    }
}
