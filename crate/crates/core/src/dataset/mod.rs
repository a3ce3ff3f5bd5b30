//! Paragraph and review datapoint compilation: quote-match extraction, then
//! a purpose filter, then an aspect filter.

mod classify;
mod extract;

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aspect::Aspect;
use crate::text::sha256_hex;

pub use classify::{rule_based_aspect, rule_based_purpose, ClassifierHandle, CommunicativePurpose, ExternalClassifier};
pub use extract::{extract_pairs, match_review, paragraph_contains, ExtractedPair, MatchParams, PaperRecord, ReviewSentence};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("external classifier unavailable: {0}")]
    ExternalClassifierUnavailable(String),
    #[error("classifier returned an unusable label: {0}")]
    BadLabel(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Datapoint {
    pub unique_id: String,
    pub paper_id: String,
    pub paragraph: String,
    pub human_review: String,
    pub human_review_aspect: Aspect,
}

pub fn unique_id(paper_id: &str, review: &str) -> String {
    let mut key = String::with_capacity(paper_id.len() + review.len() + 1);
    key.push_str(paper_id);
    key.push('\u{1f}');
    key.push_str(review);
    sha256_hex(key.as_bytes())[..16].to_string()
}

/// Classifiers for the two filter stages.
#[derive(Debug, Clone)]
pub struct Classifiers {
    pub purpose: ClassifierHandle,
    pub aspect: ClassifierHandle,
}

impl Classifiers {
    pub fn rule_based() -> Self {
        Classifiers { purpose: ClassifierHandle::RuleBased, aspect: ClassifierHandle::RuleBased }
    }
}

/// Records retained after each stage, plus records skipped along the way.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub reviews_in: usize,
    pub extracted: usize,
    pub after_purpose: usize,
    pub after_aspect: usize,
    pub duplicates: usize,
    pub unknown_paper: usize,
    pub bad_labels: usize,
    pub purposes: BTreeMap<CommunicativePurpose, usize>,
}

impl StageReport {
    pub fn render(&self) -> String {
        let stage = |name: &str, before: usize, after: usize| {
            format!("{name:<16} {after:>6} retained {:>6} dropped\n", before.saturating_sub(after))
        };
        let mut out = format!("{:<16} {:>6}\n", "reviews", self.reviews_in);
        out += &stage("extraction", self.reviews_in, self.extracted);
        out += &stage("purpose filter", self.extracted, self.after_purpose);
        out += &stage("aspect filter", self.after_purpose, self.after_aspect);
        if self.duplicates + self.unknown_paper + self.bad_labels > 0 {
            out += &format!(
                "skipped: {} duplicate, {} unknown paper, {} bad label\n",
                self.duplicates, self.unknown_paper, self.bad_labels
            );
        }
        out
    }
}

struct Candidate {
    paper_id: String,
    pair: ExtractedPair,
}

/// Keeps `Ok(None)` for records whose label could not be used; other
/// errors abort the run.
fn classify_all<T: Send>(
    items: &[Candidate],
    f: impl Fn(&str) -> Result<T, DatasetError> + Sync,
) -> Result<Vec<Option<T>>, DatasetError> {
    items
        .par_iter()
        .map(|c| match f(&c.pair.review) {
            Ok(label) => Ok(Some(label)),
            Err(DatasetError::BadLabel(msg)) => {
                tracing::warn!(paper_id = %c.paper_id, "skipping record: {msg}");
                Ok(None)
            }
            Err(e) => Err(e),
        })
        .collect()
}

/// Runs the full cascade. Output follows review input order.
pub fn compile(
    papers: &[PaperRecord],
    reviews: &[ReviewSentence],
    classifiers: &Classifiers,
    params: &MatchParams,
) -> Result<(Vec<Datapoint>, StageReport), DatasetError> {
    let mut report = StageReport { reviews_in: reviews.len(), ..StageReport::default() };
    let by_id: BTreeMap<&str, &PaperRecord> = papers.iter().map(|p| (p.paper_id.as_str(), p)).collect();

    let mut seen = HashSet::new();
    let mut unique: Vec<(&PaperRecord, &str)> = Vec::with_capacity(reviews.len());
    for r in reviews {
        if !seen.insert((r.paper_id.as_str(), r.review_sentence.as_str())) {
            report.duplicates += 1;
            continue;
        }
        match by_id.get(r.paper_id.as_str()) {
            Some(p) => unique.push((p, r.review_sentence.as_str())),
            None => report.unknown_paper += 1,
        }
    }

    let extracted: Vec<Candidate> = unique
        .par_iter()
        .filter_map(|(paper, review)| {
            extract_pairs(paper, &[review], params)
                .pop()
                .map(|pair| Candidate { paper_id: paper.paper_id.clone(), pair })
        })
        .collect();
    report.extracted = extracted.len();

    let purposes = classify_all(&extracted, |t| classifiers.purpose.classify_purpose(t))?;
    let mut actionable = Vec::new();
    for (c, p) in extracted.into_iter().zip(purposes) {
        let Some(p) = p else {
            report.bad_labels += 1;
            continue;
        };
        *report.purposes.entry(p).or_default() += 1;
        if p.is_actionable() {
            actionable.push(c);
        }
    }
    report.after_purpose = actionable.len();

    let aspects = classify_all(&actionable, |t| classifiers.aspect.classify_aspect(t))?;
    let mut out = Vec::new();
    for (c, a) in actionable.into_iter().zip(aspects) {
        match a {
            None => report.bad_labels += 1,
            Some(a) if a.is_in_scope() => out.push(Datapoint {
                unique_id: unique_id(&c.paper_id, &c.pair.review),
                paper_id: c.paper_id,
                paragraph: c.pair.paragraph,
                human_review: c.pair.review,
                human_review_aspect: a,
            }),
            Some(_) => {}
        }
    }
    report.after_aspect = out.len();
    Ok((out, report))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<Vec<T>, DatasetError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DatasetError::Parse { path: path.into(), line: i + 1, message: e.to_string() })
        })
        .collect()
}

/// Reads papers from a JSON array, a single JSON object or JSONL.
pub fn load_papers(path: &Path) -> Result<Vec<PaperRecord>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed)
            .map_err(|e| DatasetError::Parse { path: path.into(), line: e.line(), message: e.to_string() });
    }
    if let Ok(one) = serde_json::from_str::<PaperRecord>(trimmed) {
        return Ok(vec![one]);
    }
    read_jsonl(path, &text)
}

pub fn load_reviews(path: &Path) -> Result<Vec<ReviewSentence>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    read_jsonl(path, &text)
}

pub fn write_datapoints(mut out: impl Write, points: &[Datapoint]) -> std::io::Result<()> {
    for p in points {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_datapoints(input: impl BufRead) -> Result<Vec<Datapoint>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(io_err(Path::new("<datapoints>")))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
            path: "<datapoints>".into(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn review(paper_id: &str, s: &str) -> ReviewSentence {
        ReviewSentence { paper_id: paper_id.into(), review_sentence: s.into() }
    }

    #[test]
    fn empty_corpus_gives_zeroed_report() {
        let (points, report) = compile(&[], &[], &Classifiers::rule_based(), &MatchParams::default()).unwrap();
        assert!(points.is_empty());
        assert_eq!(report, StageReport::default());
    }

    #[test]
    fn duplicates_and_unknown_papers_are_counted() {
        let papers = vec![PaperRecord { paper_id: "a".into(), paragraphs: vec!["The loss is minimised with plain gradient descent.".into()] }];
        let r = "The claim \"minimised with plain gradient descent\" lacks justification.";
        let (points, report) =
            compile(&papers, &[review("a", r), review("a", r), review("zz", r)], &Classifiers::rule_based(), &MatchParams::default())
                .unwrap();
        assert_eq!(points.len(), 1);
        assert_eq!((report.duplicates, report.unknown_paper), (1, 1));
        assert_eq!(points[0].unique_id, unique_id("a", r));
        assert_eq!(points[0].unique_id.len(), 16);
    }

    #[test]
    fn unique_id_separates_fields() {
        assert_ne!(unique_id("ab", "c"), unique_id("a", "bc"));
        assert_eq!(unique_id("a", "b"), unique_id("a", "b"));
    }

    #[test]
    fn datapoint_jsonl_round_trip() {
        let p = Datapoint {
            unique_id: "0123456789abcdef".into(),
            paper_id: "p".into(),
            paragraph: "x".into(),
            human_review: "y".into(),
            human_review_aspect: Aspect::Soundness,
        };
        let mut buf = Vec::new();
        write_datapoints(&mut buf, std::slice::from_ref(&p)).unwrap();
        let line = String::from_utf8(buf.clone()).unwrap();
        assert!(line.starts_with("{\"unique_id\":\"0123456789abcdef\",\"paper_id\":\"p\",\"paragraph\":\"x\",\"human_review\":\"y\""));
        assert_eq!(read_datapoints(&buf[..]).unwrap(), vec![p]);
    }
}
