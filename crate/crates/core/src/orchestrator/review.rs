use serde::{Deserialize, Serialize};

use super::action::{first_json_object, ActionParseError};
use crate::aspect::Aspect;
use crate::text::{best_substring_match, char_slice, collapse_whitespace, fold_quotes};

/// The reviewer's output after validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub quoted_substring: String,
    pub label: Aspect,
    pub review_text: String,
    pub reasoning: String,
}

/// Reviewer reply fields before quote verification.
#[derive(Debug, Clone, PartialEq)]
pub struct RawReview {
    pub reasoning: String,
    pub label: Aspect,
    pub review: String,
    /// An explicit quote field, when the model supplied one.
    pub quote: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReviewSchemaError {
    #[error(transparent)]
    Json(#[from] ActionParseError),
    #[error("label `{0}` is not one of the five review labels")]
    Label(String),
}

pub fn parse_review_reply(text: &str) -> Result<RawReview, ReviewSchemaError> {
    let map = first_json_object(text)?;
    let field = |name: &'static str| -> Result<String, ActionParseError> {
        match map.get(name) {
            None => Err(ActionParseError::MissingField(name)),
            Some(serde_json::Value::String(s)) => Ok(s.trim().to_string()),
            Some(_) => Err(ActionParseError::WrongType(name)),
        }
    };
    let reasoning = field("reasoning")?;
    let label_text = field("label")?;
    let review = field("review")?;
    if review.is_empty() {
        return Err(ActionParseError::WrongType("review").into());
    }
    let label: Aspect = label_text.parse().map_err(|_| ReviewSchemaError::Label(label_text.clone()))?;
    if !label.is_in_scope() {
        return Err(ReviewSchemaError::Label(label_text));
    }
    let quote = ["quoted_substring", "quote"]
        .iter()
        .find_map(|k| map.get(*k).and_then(|v| v.as_str()))
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty());
    Ok(RawReview { reasoning, label, review, quote })
}

/// A verified quote, or the closest failed candidate.
#[derive(Debug, Clone, PartialEq)]
pub enum QuoteCheck {
    Verified { quote: String, similarity: f64 },
    Rejected { candidate: String, similarity: f64 },
}

fn norm(text: &str) -> String {
    collapse_whitespace(&fold_quotes(text))
}

/// Checks each candidate against the paragraph: exact containment after
/// whitespace and quote normalisation first, then the best approximate
/// substring at or above `threshold`. Exact hits beat fuzzy ones; longer
/// exact hits win.
pub fn verify_quote<'a>(paragraph: &str, candidates: impl IntoIterator<Item = &'a str>, threshold: f64) -> QuoteCheck {
    let para = norm(paragraph);
    let mut exact: Option<String> = None;
    let mut fuzzy: Option<(String, f64)> = None;
    let mut closest = (String::new(), 0.0);
    for cand in candidates {
        let c = norm(cand);
        if c.is_empty() {
            continue;
        }
        if para.contains(&c) {
            if exact.as_ref().is_none_or(|e| c.chars().count() > e.chars().count()) {
                exact = Some(c);
            }
            continue;
        }
        let Some(m) = best_substring_match(&c, &para) else { continue };
        if m.similarity >= threshold {
            if fuzzy.as_ref().is_none_or(|(_, s)| m.similarity > *s) {
                fuzzy = Some((char_slice(&para, m.start, m.end), m.similarity));
            }
        } else if m.similarity >= closest.1 {
            closest = (c, m.similarity);
        }
    }
    match (exact, fuzzy) {
        (Some(quote), _) => QuoteCheck::Verified { quote, similarity: 1.0 },
        (None, Some((quote, similarity))) => QuoteCheck::Verified { quote, similarity },
        (None, None) => QuoteCheck::Rejected { candidate: closest.0, similarity: closest.1 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PARA: &str = "The GF-SVM approach was deployed for the first time in the prostate cancer detection dataset, \
                        and it demonstrated a significant performance improvement over the existing models in this domain. \
                        The full features of the dataset were conducted in the experiments.";

    #[test]
    fn single_and_double_quotes_are_found() {
        let spans = crate::text::quoted_spans("The paragraph states, 'The GF-SVM approach was deployed.' It lacks \u{201C}metrics\u{201D}; the paper's claim.");
        assert_eq!(spans, ["metrics", "The GF-SVM approach was deployed."]);
    }

    #[test]
    fn exact_fuzzy_and_rejected_quotes() {
        let exact = "The GF-SVM approach was deployed for the first time";
        assert_eq!(verify_quote(PARA, [exact], 0.9), QuoteCheck::Verified { quote: exact.into(), similarity: 1.0 });

        let typo = "The GF-SVM aproach was deployed for the first time in the prostate cancer";
        match verify_quote(PARA, [typo], 0.9) {
            QuoteCheck::Verified { quote, similarity } => {
                assert!(similarity >= 0.9);
                assert!(PARA.contains(&quote));
            }
            other => panic!("{other:?}"),
        }

        assert!(matches!(
            verify_quote(PARA, ["Transformers dominate every benchmark in natural language processing"], 0.9),
            QuoteCheck::Rejected { .. }
        ));
        assert!(matches!(verify_quote(PARA, [], 0.9), QuoteCheck::Rejected { .. }));
    }

    #[test]
    fn whitespace_differences_are_exact() {
        let q = "significant   performance\nimprovement";
        assert_eq!(
            verify_quote(PARA, [q], 0.9),
            QuoteCheck::Verified { quote: "significant performance improvement".into(), similarity: 1.0 }
        );
    }

    #[test]
    fn labels_map_onto_aspects() {
        let r = parse_review_reply(r#"{"reasoning": "r", "label": "Empirical and Theoretical Soundness", "review": "x"}"#).unwrap();
        assert_eq!(r.label, Aspect::Soundness);
        assert!(matches!(
            parse_review_reply(r#"{"reasoning": "r", "label": "Clarity", "review": "x"}"#),
            Err(ReviewSchemaError::Label(_))
        ));
        assert!(parse_review_reply(r#"{"label": "Substance", "review": "x"}"#).is_err());
    }
}
