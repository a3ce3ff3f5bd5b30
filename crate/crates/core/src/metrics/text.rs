use std::collections::HashMap;
use std::sync::LazyLock;

use rust_stemmers::{Algorithm, Stemmer};

use super::MetricError;

/// Zero n-gram match counts become `epsilon / total` instead of zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothing {
    None,
    Epsilon(f64),
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing::Epsilon(1e-9)
    }
}

fn ngram_counts<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.iter().map(|t| t.as_ref()).collect()).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence BLEU with uniform weights over 1..=4-grams, counts clipped by
/// the per-reference maximum and the brevity penalty taken against the
/// closest reference length (shorter wins ties).
pub fn bleu4<T: AsRef<str>, R: AsRef<[T]>>(candidate: &[T], references: &[R], smoothing: Smoothing) -> Result<f64, MetricError> {
    if candidate.is_empty() {
        return Err(MetricError::EmptyCandidate);
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let cand = ngram_counts(candidate, n);
        let mut max_ref: HashMap<Vec<&str>, usize> = HashMap::new();
        for r in references {
            for (g, c) in ngram_counts(r.as_ref(), n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(c);
            }
        }
        let clipped: usize = cand.iter().map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0))).sum();
        let total = cand.values().sum::<usize>().max(1);
        if n == 1 && clipped == 0 {
            return Ok(0.0);
        }
        let p = match (clipped, smoothing) {
            (0, Smoothing::None) => return Ok(0.0),
            (0, Smoothing::Epsilon(eps)) => eps / total as f64,
            (c, _) => c as f64 / total as f64,
        };
        log_sum += 0.25 * p.ln();
    }
    let c = candidate.len();
    let r = references
        .iter()
        .map(|r| r.as_ref().len())
        .min_by_key(|&len| (len.abs_diff(c), len))
        .unwrap_or(0);
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    Ok(bp * log_sum.exp())
}

fn lcs_len<T: AsRef<str>>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    for x in a {
        let mut row = vec![0usize; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            row[j + 1] = if x.as_ref() == y.as_ref() { prev[j] + 1 } else { row[j].max(prev[j + 1]) };
        }
        prev = row;
    }
    prev[b.len()]
}

/// LCS-based F1.
pub fn rouge_l<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> f64 {
    let lcs = lcs_len(candidate, reference);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / candidate.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    2.0 * p * r / (p + r)
}

static STEMMER: LazyLock<Stemmer> = LazyLock::new(|| Stemmer::create(Algorithm::English));

/// Unigram alignment in two passes (exact, then stem), each greedy left to
/// right over the candidate.
pub fn align<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> Vec<(usize, usize)> {
    let mut used_c = vec![false; candidate.len()];
    let mut used_r = vec![false; reference.len()];
    let mut pairs = Vec::new();
    let stems = |toks: &[T]| -> Vec<String> { toks.iter().map(|t| STEMMER.stem(t.as_ref()).into_owned()).collect() };
    let exact_c: Vec<String> = candidate.iter().map(|t| t.as_ref().to_string()).collect();
    let exact_r: Vec<String> = reference.iter().map(|t| t.as_ref().to_string()).collect();
    for (cs, rs) in [(exact_c, exact_r), (stems(candidate), stems(reference))] {
        for (i, c) in cs.iter().enumerate() {
            if used_c[i] {
                continue;
            }
            if let Some(j) = (0..rs.len()).find(|&j| !used_r[j] && rs[j] == *c) {
                used_c[i] = true;
                used_r[j] = true;
                pairs.push((i, j));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Number of runs that are contiguous in both candidate and reference.
pub fn chunks(alignment: &[(usize, usize)]) -> usize {
    alignment.windows(2).filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1)).count() + usize::from(!alignment.is_empty())
}

/// Surface METEOR without synonym tables: recall-weighted harmonic mean
/// (alpha 0.9) times a cubic fragmentation penalty with weight 0.5.
pub fn meteor<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> f64 {
    let alignment = align(candidate, reference);
    let m = alignment.len();
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / candidate.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let frag = chunks(&alignment) as f64 / m as f64;
    fmean * (1.0 - 0.5 * frag.powi(3))
}
