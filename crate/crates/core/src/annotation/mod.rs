//! Blind pairwise-comparison sessions and the HTTP service that collects
//! judgments for them.

mod server;
mod session;
mod store;

use std::path::{Path, PathBuf};

pub use server::{router, serve, Sessions};
pub use session::{demo_spec, guideline, Choice, EvaluationSession, SessionExample, SessionSpec, Task, TaskCard};
pub use store::{Count, NextTask, Progress, SessionStore};

#[derive(Debug, thiserror::Error)]
pub enum AnnotationError {
    #[error("no review from system `{system}` for example `{example_id}`")]
    MissingReview { example_id: String, system: String },
    #[error("invalid session: {0}")]
    InvalidSession(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown annotator `{0}`")]
    UnknownAnnotator(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("task `{0}` has already been judged")]
    AlreadyJudged(String),
    #[error("journal line {line}: {message}")]
    CorruptJournal { line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl AnnotationError {
    pub fn kind(&self) -> &'static str {
        match self {
            AnnotationError::MissingReview { .. } => "missing_review",
            AnnotationError::InvalidSession(_) => "invalid_session",
            AnnotationError::UnknownSession(_) => "unknown_session",
            AnnotationError::UnknownAnnotator(_) => "unknown_annotator",
            AnnotationError::UnknownTask(_) => "unknown_task",
            AnnotationError::AlreadyJudged(_) => "already_judged",
            AnnotationError::CorruptJournal { .. } => "corrupt_journal",
            AnnotationError::Io { .. } => "io",
        }
    }
}

/// Reads a session definition file and builds the session.
pub fn load_session(path: &Path) -> Result<EvaluationSession, AnnotationError> {
    let text = std::fs::read_to_string(path).map_err(|e| AnnotationError::Io { path: path.into(), source: e })?;
    let spec: SessionSpec = serde_json::from_str(&text).map_err(|e| AnnotationError::InvalidSession(format!("{}: {e}", path.display())))?;
    EvaluationSession::create(spec)
}
