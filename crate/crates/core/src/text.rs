//! Text normalisation, tokenisation and approximate matching helpers shared
//! by the pipeline, the dataset compiler and the metrics.

use std::sync::LazyLock;

use regex::Regex;
use sha2::{Digest, Sha256};

/// Collapses every run of whitespace into a single space and trims.
pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Maps typographic quotes and apostrophes onto their ASCII forms.
pub fn fold_quotes(text: &str) -> String {
    text.chars()
        .map(|c| match c {
            '\u{2018}' | '\u{2019}' | '\u{201A}' | '\u{201B}' | '\u{2032}' | '`' | '\u{00B4}' => '\'',
            '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{201F}' | '\u{00AB}' | '\u{00BB}' | '\u{2033}' => '"',
            '\u{2026}' => '…',
            other => other,
        })
        .collect()
}

/// Whitespace collapse, quote folding and lowercasing.
pub fn normalize_for_match(text: &str) -> String {
    collapse_whitespace(&fold_quotes(text)).to_lowercase()
}

/// Lowercased alphanumeric word tokens. Apostrophes inside a word are kept
/// (`don't`), everything else separates tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let folded = fold_quotes(text);
    let mut tokens = Vec::new();
    let mut current = String::new();
    let chars: Vec<char> = folded.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        let inner_apostrophe = c == '\''
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if c.is_alphanumeric() || inner_apostrophe {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "all", "also", "am", "an", "and", "any", "are", "as",
    "at", "be", "been", "before", "being", "between", "both", "but", "by", "can", "could", "did",
    "do", "does", "doing", "during", "each", "few", "for", "from", "further", "had", "has", "have",
    "having", "he", "her", "here", "hers", "him", "his", "how", "i", "if", "in", "into", "is", "it",
    "its", "itself", "just", "me", "more", "most", "my", "no", "nor", "not", "of", "off", "on",
    "once", "only", "or", "other", "our", "ours", "out", "over", "own", "same", "she", "should",
    "so", "some", "such", "than", "that", "the", "their", "theirs", "them", "then", "there",
    "these", "they", "this", "those", "through", "to", "too", "under", "until", "up", "used",
    "using", "very", "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom",
    "why", "will", "with", "would", "you", "your", "yours", "paper", "search", "understand",
    "question", "answer", "web", "investigator", "reviewer",
];

/// Tokens that are not stopwords and are longer than one character.
pub fn content_words(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| t.chars().count() > 1 && !STOPWORDS.contains(&t.as_str()))
        .collect()
}

/// Hex SHA-256 digest.
pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// 64-bit FNV-1a. Stable across platforms and toolchains, used to seed
/// pseudo-random generators from text.
pub fn fnv1a64(data: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in data {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Levenshtein distance over chars.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            cur[j] = (prev[j] + 1).min(cur[j - 1] + 1).min(prev[j - 1] + cost);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Best approximate occurrence of `pattern` inside `text`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxMatch {
    /// Char offsets of the matched region of `text`.
    pub start: usize,
    pub end: usize,
    pub distance: usize,
    /// `1 - distance / pattern_len`, clamped to `[0, 1]`.
    pub similarity: f64,
}

/// Semi-global edit distance: the substring of `text` with the smallest
/// Levenshtein distance to `pattern`. Ties prefer the earliest end, then
/// the longest match.
pub fn best_substring_match(pattern: &str, text: &str) -> Option<ApproxMatch> {
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    if p.is_empty() || t.is_empty() {
        return None;
    }
    let m = p.len();
    // dist[i] and start[i] for the current text column; row i = pattern prefix length.
    let mut prev_d: Vec<usize> = (0..=m).collect();
    let mut prev_s: Vec<usize> = vec![0; m + 1];
    let mut best: Option<(usize, usize, usize)> = None; // (distance, start, end)
    for j in 1..=t.len() {
        let mut cur_d = vec![0usize; m + 1];
        let mut cur_s = vec![j; m + 1];
        for i in 1..=m {
            let cost = usize::from(p[i - 1] != t[j - 1]);
            let diag = (prev_d[i - 1] + cost, prev_s[i - 1]);
            let up = (cur_d[i - 1] + 1, cur_s[i - 1]);
            let left = (prev_d[i] + 1, prev_s[i]);
            let mut choice = diag;
            for cand in [up, left] {
                // Prefer smaller distance, then earlier start (longer span).
                if cand.0 < choice.0 || (cand.0 == choice.0 && cand.1 < choice.1) {
                    choice = cand;
                }
            }
            cur_d[i] = choice.0;
            cur_s[i] = choice.1;
        }
        let d = cur_d[m];
        let s = cur_s[m];
        if best.is_none_or(|(bd, _, _)| d < bd) {
            best = Some((d, s, j));
        }
        prev_d = cur_d;
        prev_s = cur_s;
    }
    best.map(|(distance, start, end)| ApproxMatch {
        start,
        end,
        distance,
        similarity: (1.0 - distance as f64 / m as f64).max(0.0),
    })
}

/// Slices `text` by char offsets.
pub fn char_slice(text: &str, start: usize, end: usize) -> String {
    text.chars().skip(start).take(end.saturating_sub(start)).collect()
}

static DOUBLE_QUOTED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#""([^"]+)""#).expect("valid regex"));
static SINGLE_QUOTED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?:^|[\s(\[:,;])'(.+?)'(?:$|[\s)\].,;:!?])"#).expect("valid regex"));

/// Spans enclosed in quote marks, after folding typographic quotes.
pub fn quoted_spans(text: &str) -> Vec<String> {
    let folded = fold_quotes(text);
    let mut spans: Vec<String> = DOUBLE_QUOTED.captures_iter(&folded).map(|c| c[1].to_string()).collect();
    spans.extend(SINGLE_QUOTED.captures_iter(&folded).map(|c| c[1].to_string()));
    spans.retain(|s| !s.trim().is_empty());
    spans
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_keeps_inner_apostrophes() {
        assert_eq!(tokenize("I don't know."), vec!["i", "don't", "know"]);
        assert_eq!(tokenize("‘Types of ...’ is"), vec!["types", "of", "is"]);
        assert!(tokenize("  ...  ").is_empty());
    }

    #[test]
    fn normalisation_folds_quotes_and_case() {
        assert_eq!(normalize_for_match("  “RL  Methods”\n optimize "), "\"rl methods\" optimize");
    }

    #[test]
    fn approx_match_finds_exact_substring() {
        let m = best_substring_match("quick brown", "the quick brown fox").unwrap();
        assert_eq!((m.start, m.end, m.distance), (4, 15, 0));
        assert_eq!(m.similarity, 1.0);
    }

    #[test]
    fn approx_match_tolerates_single_edit() {
        let m = best_substring_match("quick browm fox", "the quick brown fox jumps").unwrap();
        assert_eq!(m.distance, 1);
        assert_eq!(char_slice("the quick brown fox jumps", m.start, m.end), "quick brown fox");
        assert!((m.similarity - (1.0 - 1.0 / 15.0)).abs() < 1e-12);
    }

    #[test]
    fn approx_match_distance_agrees_with_brute_force() {
        let text = "abcabdabxe";
        let pattern = "abde";
        let m = best_substring_match(pattern, text).unwrap();
        let n = text.len();
        let brute = (0..=n)
            .flat_map(|s| (s..=n).map(move |e| (s, e)))
            .map(|(s, e)| levenshtein(pattern, &text[s..e]))
            .min()
            .unwrap();
        assert_eq!(m.distance, brute);
        assert_eq!(levenshtein(pattern, &char_slice(text, m.start, m.end)), m.distance);
    }

    #[test]
    fn fnv_is_stable() {
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
    }
}
