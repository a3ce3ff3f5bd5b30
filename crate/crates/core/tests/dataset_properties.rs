use std::collections::HashSet;

use focused_feedback::dataset::{compile, paragraph_contains, unique_id, Classifiers, MatchParams, PaperRecord, ReviewSentence};
use proptest::prelude::*;

const WORDS: [&str; 12] = ["model", "data", "loss", "graph", "noise", "layer", "train", "test", "error", "scale", "token", "batch"];

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(0usize..WORDS.len(), 4..14).prop_map(|ix| ix.into_iter().map(|i| WORDS[i]).collect::<Vec<_>>().join(" "))
}

fn review_of(paragraphs: Vec<String>) -> impl Strategy<Value = (Vec<String>, Vec<String>)> {
    let n = paragraphs.len();
    let picks = prop::collection::vec((0..n, 0usize..4, 3usize..7, prop::bool::ANY, prop_oneof![Just("lacks"), Just("should"), Just("is good")]), 1..12);
    (Just(paragraphs), picks).prop_map(|(paras, picks)| {
        let reviews = picks
            .into_iter()
            .map(|(p, start, len, quoted, cue)| {
                let toks: Vec<&str> = paras[p].split(' ').collect();
                let s = start.min(toks.len().saturating_sub(1));
                let span = toks[s..(s + len).min(toks.len())].join(" ");
                if quoted { format!("The text \"{span}\" {cue} evidence.") } else { format!("Here {span} {cue} more.") }
            })
            .collect();
        (paras, reviews)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn cascade_invariants((paragraphs, reviews) in prop::collection::vec(sentence(), 1..5).prop_flat_map(review_of)) {
        let papers = vec![PaperRecord { paper_id: "p".into(), paragraphs }];
        let reviews: Vec<ReviewSentence> = reviews.into_iter().map(|r| ReviewSentence { paper_id: "p".into(), review_sentence: r }).collect();
        let (points, report) = compile(&papers, &reviews, &Classifiers::rule_based(), &MatchParams::default()).unwrap();
        prop_assert!(report.reviews_in >= report.extracted + report.duplicates);
        prop_assert!(report.extracted >= report.after_purpose);
        prop_assert!(report.after_purpose >= report.after_aspect);
        prop_assert_eq!(points.len(), report.after_aspect);
        let ids: HashSet<&str> = points.iter().map(|p| p.unique_id.as_str()).collect();
        prop_assert_eq!(ids.len(), points.len());
        for p in &points {
            prop_assert!(p.human_review_aspect.is_in_scope());
            prop_assert_eq!(&p.unique_id, &unique_id(&p.paper_id, &p.human_review));
            let spans = focused_feedback::text::quoted_spans(&p.human_review);
            if !spans.is_empty() {
                prop_assert!(spans.iter().any(|s| paragraph_contains(&p.paragraph, s)));
            }
        }
    }
}
