use std::collections::HashMap;
use std::sync::Arc;

use focused_feedback::annotation::{demo_spec, router, Choice, EvaluationSession, SessionStore};
use focused_feedback::metrics::{dominance, read_judgments, write_judgments, Criterion, Outcome};
use serde_json::{json, Value};

const SYSTEMS: [&str; 4] = ["swif2t", "gpt4", "cove", "human"];

async fn spawn(store: SessionStore) -> String {
    let mut sessions = HashMap::new();
    sessions.insert(store.session.session_id.clone(), Arc::new(store));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let static_dir = std::env::temp_dir();
    tokio::spawn(async move { axum::serve(listener, router(Arc::new(sessions), Some(static_dir))).await.unwrap() });
    format!("http://{addr}")
}

fn demo_session() -> EvaluationSession {
    EvaluationSession::create(demo_spec("demo", 2, &["swif2t", "gpt4"], &["ann"], 0.0, 3)).unwrap()
}

#[tokio::test]
async fn six_task_demo_flow() {
    let base = spawn(SessionStore::in_memory(demo_session())).await;
    let http = reqwest::Client::new();
    let progress: Value = http.get(format!("{base}/session/demo/progress")).send().await.unwrap().json().await.unwrap();
    assert_eq!((progress["judged"].as_u64(), progress["total"].as_u64()), (Some(0), Some(6)));

    let first: Value = http.get(format!("{base}/session/demo/next?annotator=ann")).send().await.unwrap().json().await.unwrap();
    let again: Value = http.get(format!("{base}/session/demo/next?annotator=ann")).send().await.unwrap().json().await.unwrap();
    assert_eq!(first, again);
    assert_eq!(first["status"], "task");
    let text = first.to_string();
    for s in ["swif2t", "gpt4"] {
        assert!(!text.contains(s));
    }

    let task_id = first["task_id"].as_str().unwrap().to_string();
    let body = json!({"annotator": "ann", "task_id": task_id, "choice": "Left"});
    let r = http.post(format!("{base}/session/demo/judgments")).json(&body).send().await.unwrap();
    assert_eq!(r.status(), 201);
    let r = http.post(format!("{base}/session/demo/judgments")).json(&body).send().await.unwrap();
    assert_eq!(r.status(), 409);
    let err: Value = r.json().await.unwrap();
    assert_eq!(err["kind"], "already_judged");

    let progress: Value = http.get(format!("{base}/session/demo/progress")).send().await.unwrap().json().await.unwrap();
    assert_eq!(progress["judged"], 1);

    let next: Value = http.get(format!("{base}/session/demo/next?annotator=ann")).send().await.unwrap().json().await.unwrap();
    assert_ne!(next["task_id"], first["task_id"]);
    for _ in 0..5 {
        let t: Value = http.get(format!("{base}/session/demo/next?annotator=ann")).send().await.unwrap().json().await.unwrap();
        let body = json!({"annotator": "ann", "task_id": t["task_id"], "choice": "Tie"});
        assert_eq!(http.post(format!("{base}/session/demo/judgments")).json(&body).send().await.unwrap().status(), 201);
    }
    let done: Value = http.get(format!("{base}/session/demo/next?annotator=ann")).send().await.unwrap().json().await.unwrap();
    assert_eq!(done, json!({"status": "done"}));

    let exported = http.get(format!("{base}/session/demo/export")).send().await.unwrap().text().await.unwrap();
    let judgments = read_judgments(&exported).unwrap();
    assert_eq!(judgments.len(), 6);
    assert_eq!(write_judgments(&judgments), exported);
}

#[tokio::test]
async fn error_statuses() {
    let base = spawn(SessionStore::in_memory(demo_session())).await;
    let http = reqwest::Client::new();
    assert_eq!(http.get(format!("{base}/session/nope/progress")).send().await.unwrap().status(), 404);
    assert_eq!(http.get(format!("{base}/session/demo/next?annotator=eve")).send().await.unwrap().status(), 403);
    let body = json!({"annotator": "ann", "task_id": "0000", "choice": "Right"});
    assert_eq!(http.post(format!("{base}/session/demo/judgments")).json(&body).send().await.unwrap().status(), 404);
    let bad = json!({"annotator": "ann", "task_id": "0000", "choice": "Both"});
    assert!(http.post(format!("{base}/session/demo/judgments")).json(&bad).send().await.unwrap().status().is_client_error());
    assert_eq!(http.get(format!("{base}/session/demo/export")).send().await.unwrap().text().await.unwrap(), "");
}

#[test]
fn judgments_survive_restart_and_torn_writes() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("journal.jsonl");
    let store = SessionStore::open(demo_session(), &journal).unwrap();
    let tasks: Vec<_> = store.session.tasks.iter().take(3).cloned().collect();
    for t in &tasks {
        store.submit("ann", &t.task_id, Choice::Right).unwrap();
    }
    let before = store.export();
    drop(store);

    std::fs::OpenOptions::new().append(true).open(&journal).map(|mut f| {
        use std::io::Write;
        f.write_all(b"{\"task_id\":\"trunc").unwrap();
    }).unwrap();

    let reopened = SessionStore::open(demo_session(), &journal).unwrap();
    assert_eq!(reopened.export(), before);
    assert!(reopened.submit("ann", &tasks[0].task_id, Choice::Left).is_err());
    let t4 = &reopened.session.tasks[3];
    reopened.submit("ann", &t4.task_id, Choice::Tie).unwrap();
    drop(reopened);
    assert_eq!(SessionStore::open(demo_session(), &journal).unwrap().judgments().len(), 4);
}

#[test]
fn deblinding_round_trip_over_stored_judgments() {
    let store = SessionStore::in_memory(demo_session());
    let choices = [Choice::Left, Choice::Right, Choice::Tie];
    let tasks = store.session.tasks.clone();
    for (i, t) in tasks.iter().enumerate() {
        let j = store.submit("ann", &t.task_id, choices[i % 3]).unwrap();
        assert_eq!(Choice::reblind(j.outcome, t.presentation_order), choices[i % 3]);
        assert_eq!(j.presentation_order, t.presentation_order);
    }
}

#[test]
fn full_scale_session_conserves_mass() {
    let annotators: Vec<String> = (0..11).map(|i| format!("ann{i:02}")).collect();
    let refs: Vec<&str> = annotators.iter().map(|s| s.as_str()).collect();
    let session = EvaluationSession::create(demo_spec("full", 100, &SYSTEMS, &refs, 0.1, 42)).unwrap();
    let store = SessionStore::in_memory(session);
    let tasks = store.session.tasks.clone();
    for (i, t) in tasks.iter().enumerate() {
        let choice = [Choice::Left, Choice::Right, Choice::Tie][(i * 7 + 3) % 3];
        store.submit(&t.annotator_id, &t.task_id, choice).unwrap();
    }
    let judgments = read_judgments(&store.export()).unwrap();
    assert_eq!(judgments.len(), 1980);
    let systems: Vec<String> = SYSTEMS.map(String::from).to_vec();
    let mut mass = 0.0;
    for c in Criterion::ALL {
        let t = dominance(&judgments, c, &systems).unwrap();
        // 100 examples x 6 pairs, double annotations averaged
        assert_eq!(t.total_mass(), 600.0);
        mass += t.total_mass();
    }
    assert_eq!(mass, 1800.0);
    let ties = judgments.iter().filter(|j| j.outcome == Outcome::Tie).count();
    assert!(ties > 0);
}
