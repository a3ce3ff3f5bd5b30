use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "detail")]
pub enum TraceOutcome {
    Ok,
    Retry(String),
    Error(String),
    BudgetExceeded,
}

/// One backend call attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub tag: String,
    pub request_hash: String,
    pub latency_ms: u64,
    pub attempt: u32,
    pub outcome: TraceOutcome,
}

impl TraceRecord {
    pub fn new(tag: &str, request_hash: &str, latency_ms: u64, attempt: u32, outcome: TraceOutcome) -> Self {
        TraceRecord { tag: tag.to_string(), request_hash: request_hash.to_string(), latency_ms, attempt, outcome }
    }
}

/// Append-only call log, optionally mirrored to a JSONL file.
#[derive(Debug, Default)]
pub struct TraceLog {
    records: Mutex<Vec<TraceRecord>>,
    sink: Option<Mutex<BufWriter<File>>>,
}

impl TraceLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn with_file(path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(TraceLog { records: Mutex::default(), sink: Some(Mutex::new(BufWriter::new(file))) })
    }

    pub fn append(&self, record: TraceRecord) {
        let mut records = self.records.lock().expect("trace lock poisoned");
        if let Some(sink) = &self.sink {
            let mut sink = sink.lock().expect("trace sink poisoned");
            let line = serde_json::to_string(&record).expect("trace record serializes");
            if let Err(err) = writeln!(sink, "{line}").and_then(|_| sink.flush()) {
                tracing::error!(error = %err, "failed to write trace record");
            }
        }
        records.push(record);
    }

    pub fn records(&self) -> Vec<TraceRecord> {
        self.records.lock().expect("trace lock poisoned").clone()
    }

    pub fn len(&self) -> usize {
        self.records.lock().expect("trace lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// JSONL rendering of the records from `from` onwards.
    pub fn to_jsonl(&self, from: usize) -> String {
        self.records()
            .iter()
            .skip(from)
            .map(|r| serde_json::to_string(r).expect("trace record serializes") + "\n")
            .collect()
    }

    /// Content digest of the records from `from` onwards; identifies a run.
    /// Latency is left out so that replaying a script reproduces the digest.
    pub fn digest(&self, from: usize) -> String {
        let body: String = self
            .records()
            .iter()
            .skip(from)
            .map(|r| {
                let outcome = serde_json::to_string(&r.outcome).expect("trace outcome serializes");
                format!("{}\t{}\t{}\t{outcome}\n", r.tag, r.request_hash, r.attempt)
            })
            .collect();
        crate::text::sha256_hex(body.as_bytes())[..16].to_string()
    }
}
