use serde::{Deserialize, Serialize};

use crate::text::{quoted_spans, tokenize};

/// A paper split into paragraphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub paper_id: String,
    pub paragraphs: Vec<String>,
}

/// One segmented review sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReviewSentence {
    pub paper_id: String,
    pub review_sentence: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchParams {
    /// Shortest quoted span, in tokens, that is looked up.
    pub min_quote_tokens: usize,
    /// Shortest verbatim overlap accepted when the sentence has no quote marks.
    pub min_ngram_tokens: usize,
}

impl Default for MatchParams {
    fn default() -> Self {
        MatchParams { min_quote_tokens: 3, min_ngram_tokens: 5 }
    }
}

/// A review sentence linked to the paragraph it quotes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedPair {
    pub paragraph_index: usize,
    pub paragraph: String,
    pub review: String,
    /// Normalised token span shared by review and paragraph.
    pub evidence: String,
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Length of the longest common contiguous token run, with its start in `a`.
fn longest_common_run(a: &[String], b: &[String]) -> (usize, usize) {
    let mut best = (0, 0);
    let mut prev = vec![0usize; b.len() + 1];
    for i in 1..=a.len() {
        let mut row = vec![0usize; b.len() + 1];
        for j in 1..=b.len() {
            if a[i - 1] == b[j - 1] {
                row[j] = prev[j - 1] + 1;
                if row[j] > best.0 {
                    best = (row[j], i - row[j]);
                }
            }
        }
        prev = row;
    }
    best
}

/// Finds the single paragraph a review sentence quotes, if any.
pub fn match_review(paragraphs: &[Vec<String>], review: &str, params: &MatchParams) -> Option<(usize, String)> {
    let spans = quoted_spans(review);
    if !spans.is_empty() {
        let mut target: Option<(usize, String)> = None;
        for span in spans {
            let toks = tokenize(&span);
            if toks.len() < params.min_quote_tokens {
                continue;
            }
            let hits: Vec<usize> = (0..paragraphs.len()).filter(|&i| contains_run(&paragraphs[i], &toks)).collect();
            // A span found in several paragraphs says nothing about the link.
            let [index] = hits[..] else { continue };
            match &target {
                Some((t, _)) if *t != index => return None,
                Some((_, e)) if e.len() >= toks.join(" ").len() => {}
                _ => target = Some((index, toks.join(" "))),
            }
        }
        return target;
    }

    let review_toks = tokenize(review);
    let runs: Vec<(usize, usize)> = paragraphs.iter().map(|p| longest_common_run(&review_toks, p)).collect();
    let longest = runs.iter().map(|r| r.0).max().unwrap_or(0);
    if longest < params.min_ngram_tokens {
        return None;
    }
    let mut at_longest = runs.iter().enumerate().filter(|(_, r)| r.0 == longest);
    let (index, (len, start)) = at_longest.next()?;
    if at_longest.next().is_some() {
        return None;
    }
    Some((index, review_toks[*start..start + len].join(" ")))
}

/// Links each review sentence of `paper` to the paragraph it quotes.
/// Sentences that match nothing, or match ambiguously, are dropped.
pub fn extract_pairs(paper: &PaperRecord, reviews: &[&str], params: &MatchParams) -> Vec<ExtractedPair> {
    let paragraphs: Vec<Vec<String>> = paper.paragraphs.iter().map(|p| tokenize(p)).collect();
    reviews
        .iter()
        .filter_map(|review| {
            let (paragraph_index, evidence) = match_review(&paragraphs, review, params)?;
            Some(ExtractedPair {
                paragraph_index,
                paragraph: paper.paragraphs[paragraph_index].clone(),
                review: review.to_string(),
                evidence,
            })
        })
        .collect()
}

/// Post-hoc check that `paragraph` contains `evidence` at token level.
pub fn paragraph_contains(paragraph: &str, evidence: &str) -> bool {
    contains_run(&tokenize(paragraph), &tokenize(evidence))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper(paragraphs: &[&str]) -> PaperRecord {
        PaperRecord { paper_id: "p".into(), paragraphs: paragraphs.iter().map(|s| s.to_string()).collect() }
    }

    #[test]
    fn quoted_clause_links_to_its_paragraph() {
        let p = paper(&[
            "We build a dialogue agent. RL methods optimize for short-term returns, so we add a planner.",
            "Experiments use three benchmarks.",
        ]);
        let review = "The statement \u{201C}RL methods optimize for short-term returns\u{201D} is not fair.";
        let pairs = extract_pairs(&p, &[review], &MatchParams::default());
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].paragraph_index, 0);
        assert_eq!(pairs[0].evidence, "rl methods optimize for short term returns");
    }

    #[test]
    fn span_in_two_paragraphs_is_ambiguous() {
        let p = paper(&["The model is trained end to end here.", "Again the model is trained end to end."]);
        assert!(extract_pairs(&p, &["Why is \"the model is trained end to end\" needed?"], &MatchParams::default()).is_empty());
    }

    #[test]
    fn spans_pointing_at_different_paragraphs_drop_the_sentence() {
        let p = paper(&["Alpha beta gamma delta epsilon.", "Zeta eta theta iota kappa."]);
        let r = "Compare \"alpha beta gamma\" with \"eta theta iota\".";
        assert!(extract_pairs(&p, &[r], &MatchParams::default()).is_empty());
    }

    #[test]
    fn no_overlap_gives_no_pair() {
        let p = paper(&["Graph neural networks propagate messages along edges."]);
        let params = MatchParams::default();
        assert!(extract_pairs(&p, &["The evaluation is too small to be convincing."], &params).is_empty());
        // four shared tokens fall below the verbatim threshold
        assert!(extract_pairs(&p, &["Why do networks propagate messages along paths?"], &params).is_empty());
        assert!(extract_pairs(&p, &["Short \"edges\" quote."], &params).is_empty());
    }

    #[test]
    fn verbatim_overlap_without_quotes() {
        let p = paper(&["Graph neural networks propagate messages along edges.", "Unrelated text."]);
        let pairs = extract_pairs(&p, &["It is claimed that graph neural networks propagate messages, which is vague."], &MatchParams::default());
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].evidence, "graph neural networks propagate messages");
        assert!(paragraph_contains(&pairs[0].paragraph, &pairs[0].evidence));
    }

    #[test]
    fn normalisation_is_case_and_whitespace_blind() {
        let p = paper(&["The  Transport plan\nis computed with Sinkhorn."]);
        let pairs = extract_pairs(&p, &["'the transport PLAN is computed' is vague."], &MatchParams::default());
        assert_eq!(pairs.len(), 1);
    }
}
