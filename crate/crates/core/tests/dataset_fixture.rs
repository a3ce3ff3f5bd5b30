use std::path::PathBuf;

use focused_feedback::aspect::Aspect;
use focused_feedback::dataset::{
    compile, load_papers, load_reviews, paragraph_contains, rule_based_purpose, unique_id, write_datapoints, Classifiers,
    CommunicativePurpose, MatchParams,
};
use focused_feedback::text::quoted_spans;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/dataset").join(name)
}

fn run() -> (Vec<focused_feedback::dataset::Datapoint>, focused_feedback::dataset::StageReport) {
    let papers = load_papers(&fixture("papers.json")).unwrap();
    let reviews = load_reviews(&fixture("reviews.jsonl")).unwrap();
    compile(&papers, &reviews, &Classifiers::rule_based(), &MatchParams::default()).unwrap()
}

#[test]
fn fixture_stage_counts() {
    let (points, report) = run();
    assert_eq!((report.reviews_in, report.extracted, report.after_purpose, report.after_aspect), (10, 10, 5, 4));
    assert_eq!(points.len(), 4);
    assert_eq!(report.purposes.get(&CommunicativePurpose::Strength), Some(&3));
    assert_eq!(report.purposes.get(&CommunicativePurpose::Recap), Some(&2));
    let aspects: Vec<Aspect> = points.iter().map(|p| p.human_review_aspect).collect();
    assert_eq!(aspects, [Aspect::Soundness, Aspect::Replicability, Aspect::MeaningfulComparison, Aspect::Soundness]);
}

#[test]
fn emitted_paragraphs_contain_the_quote() {
    let (points, _) = run();
    for p in &points {
        assert!(p.human_review_aspect.is_in_scope());
        assert!(rule_based_purpose(&p.human_review).is_actionable());
        let spans = quoted_spans(&p.human_review);
        assert!(spans.iter().any(|s| paragraph_contains(&p.paragraph, s)), "{}", p.human_review);
        assert_eq!(p.unique_id, unique_id(&p.paper_id, &p.human_review));
    }
}

#[test]
fn rerun_is_byte_identical() {
    let mut a = Vec::new();
    let mut b = Vec::new();
    write_datapoints(&mut a, &run().0).unwrap();
    write_datapoints(&mut b, &run().0).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

fn label_server(label: &'static str) -> String {
    use axum::routing::post;
    use axum::Json;
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            let app = axum::Router::new().route(
                "/classify",
                post(move |Json(body): Json<serde_json::Value>| async move {
                    assert!(body["text"].is_string());
                    Json(serde_json::json!({ "label": label }))
                }),
            );
            axum::serve(listener, app).await.unwrap();
        });
    });
    format!("http://{}/classify", rx.recv().unwrap())
}

#[test]
fn external_classifier_plugs_in() {
    use focused_feedback::dataset::{ClassifierHandle, DatasetError};
    let papers = load_papers(&fixture("papers.json")).unwrap();
    let reviews = load_reviews(&fixture("reviews.jsonl")).unwrap();
    let classifiers = Classifiers {
        purpose: ClassifierHandle::external(&label_server("Todo")).unwrap(),
        aspect: ClassifierHandle::external(&label_server("Originality")).unwrap(),
    };
    let (points, report) = compile(&papers, &reviews, &classifiers, &MatchParams::default()).unwrap();
    assert_eq!((report.after_purpose, report.after_aspect), (10, 10));
    assert!(points.iter().all(|p| p.human_review_aspect == Aspect::Originality));

    let odd = Classifiers { purpose: ClassifierHandle::external(&label_server("Praise")).unwrap(), aspect: ClassifierHandle::RuleBased };
    let (points, report) = compile(&papers, &reviews, &odd, &MatchParams::default()).unwrap();
    assert!(points.is_empty());
    assert_eq!(report.bad_labels, 10);

    let dead = Classifiers { purpose: ClassifierHandle::external("http://127.0.0.1:9/classify").unwrap(), aspect: ClassifierHandle::RuleBased };
    assert!(matches!(
        compile(&papers, &reviews, &dead, &MatchParams::default()),
        Err(DatasetError::ExternalClassifierUnavailable(_))
    ));
}
