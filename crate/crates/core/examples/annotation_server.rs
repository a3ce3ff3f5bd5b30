//! The annotation HTTP service on an ephemeral port, driven by a blocking
//! client the way the browser UI would.
//!
//! ```text
//! cargo run --example annotation_server
//! ```

use std::collections::HashMap;
use std::sync::Arc;

use focused_feedback::annotation::{demo_spec, router, EvaluationSession, SessionStore};

fn main() -> anyhow::Result<()> {
    let session = EvaluationSession::create(demo_spec("demo", 2, &["swif2t", "gpt4"], &["alice"], 0.0, 1))?;
    let journal = tempfile::NamedTempFile::new()?;
    let store = SessionStore::open(session, journal.path())?;
    let sessions = Arc::new(HashMap::from([("demo".to_string(), Arc::new(store))]));

    let rt = tokio::runtime::Runtime::new()?;
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let base = format!("http://{}", listener.local_addr()?);
    rt.spawn(async move { axum::serve(listener, router(sessions, None)).await });

    let client = reqwest::blocking::Client::new();
    loop {
        let next: serde_json::Value = client.get(format!("{base}/session/demo/next?annotator=alice")).send()?.json()?;
        if next["status"] == "done" {
            break;
        }
        println!("{}: {}", next["criterion"], next["task_id"]);
        let resp = client
            .post(format!("{base}/session/demo/judgments"))
            .json(&serde_json::json!({ "annotator": "alice", "task_id": next["task_id"], "choice": "Left" }))
            .send()?;
        println!("  -> {}", resp.status());
        anyhow::ensure!(resp.status().is_success(), "submission rejected: {}", resp.text()?);
    }
    let progress: serde_json::Value = client.get(format!("{base}/session/demo/progress")).send()?.json()?;
    println!("progress {progress}");
    print!("{}", client.get(format!("{base}/session/demo/export")).send()?.text()?);
    println!("journal at {} holds {} lines", journal.path().display(), std::fs::read_to_string(journal.path())?.lines().count());
    Ok(())
}
