use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::session::{Choice, EvaluationSession, TaskCard};
use super::AnnotationError;
use crate::metrics::{write_judgments, ComparisonJudgment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct JournalRecord {
    task_id: String,
    choice: Choice,
    judgment: ComparisonJudgment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextTask {
    Task(TaskCard),
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Count {
    pub judged: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub judged: usize,
    pub total: usize,
    pub per_annotator: std::collections::BTreeMap<String, Count>,
}

#[derive(Default)]
struct State {
    judged: HashMap<String, usize>,
    records: Vec<JournalRecord>,
    journal: Option<File>,
}

/// A session plus its append-only judgment journal. Submissions are
/// serialised by one lock and fsynced before they are acknowledged.
pub struct SessionStore {
    pub session: EvaluationSession,
    journal_path: Option<PathBuf>,
    state: Mutex<State>,
}

impl SessionStore {
    pub fn in_memory(session: EvaluationSession) -> Self {
        SessionStore { session, journal_path: None, state: Mutex::new(State::default()) }
    }

    /// Opens or creates the journal and replays it. A torn final line is
    /// discarded.
    pub fn open(session: EvaluationSession, journal: &Path) -> Result<Self, AnnotationError> {
        let io = |e| AnnotationError::Io { path: journal.to_path_buf(), source: e };
        let mut state = State::default();
        if journal.exists() {
            let text = std::fs::read_to_string(journal).map_err(io)?;
            let complete = text.ends_with('\n');
            let lines: Vec<&str> = text.lines().collect();
            let mut valid_len = 0usize;
            for (i, line) in lines.iter().enumerate() {
                let last = i + 1 == lines.len();
                match serde_json::from_str::<JournalRecord>(line) {
                    Ok(rec) => {
                        let task = session.task(&rec.task_id).ok_or_else(|| AnnotationError::CorruptJournal {
                            line: i + 1,
                            message: format!("task {} is not in session {}", rec.task_id, session.session_id),
                        })?;
                        if Choice::reblind(rec.judgment.outcome, task.presentation_order) != rec.choice {
                            return Err(AnnotationError::CorruptJournal { line: i + 1, message: "outcome does not match choice".into() });
                        }
                        state.judged.insert(rec.task_id.clone(), state.records.len());
                        state.records.push(rec);
                        valid_len += line.len() + 1;
                    }
                    Err(_) if last && !complete => {
                        tracing::warn!(path = %journal.display(), "discarding torn journal line");
                    }
                    Err(e) => return Err(AnnotationError::CorruptJournal { line: i + 1, message: e.to_string() }),
                }
            }
            if valid_len != text.len() {
                let f = OpenOptions::new().write(true).open(journal).map_err(io)?;
                f.set_len(valid_len as u64).map_err(io)?;
                f.sync_all().map_err(io)?;
            }
        }
        state.journal = Some(OpenOptions::new().create(true).append(true).open(journal).map_err(io)?);
        Ok(SessionStore { session, journal_path: Some(journal.to_path_buf()), state: Mutex::new(state) })
    }

    fn check_annotator(&self, annotator: &str) -> Result<(), AnnotationError> {
        if self.session.annotators.iter().any(|a| a == annotator) {
            Ok(())
        } else {
            Err(AnnotationError::UnknownAnnotator(annotator.into()))
        }
    }

    pub fn next_task(&self, annotator: &str) -> Result<NextTask, AnnotationError> {
        self.check_annotator(annotator)?;
        let state = self.state.lock().expect("store lock");
        Ok(self
            .session
            .tasks_for(annotator)
            .find(|t| !state.judged.contains_key(&t.task_id))
            .map(|t| NextTask::Task(self.session.card(t)))
            .unwrap_or(NextTask::Done))
    }

    pub fn submit(&self, annotator: &str, task_id: &str, choice: Choice) -> Result<ComparisonJudgment, AnnotationError> {
        self.check_annotator(annotator)?;
        let task = self
            .session
            .task(task_id)
            .filter(|t| t.annotator_id == annotator)
            .ok_or_else(|| AnnotationError::UnknownTask(task_id.into()))?;
        let mut state = self.state.lock().expect("store lock");
        if state.judged.contains_key(task_id) {
            return Err(AnnotationError::AlreadyJudged(task_id.into()));
        }
        let judgment = ComparisonJudgment {
            example_id: task.example_id.clone(),
            criterion: task.criterion,
            system_a: task.system_a.clone(),
            system_b: task.system_b.clone(),
            outcome: choice.deblind(task.presentation_order),
            annotator_id: annotator.into(),
            presentation_order: task.presentation_order,
        };
        let record = JournalRecord { task_id: task_id.into(), choice, judgment: judgment.clone() };
        if let Some(file) = state.journal.as_mut() {
            let path = self.journal_path.clone().unwrap_or_default();
            let io = |e| AnnotationError::Io { path: path.clone(), source: e };
            let mut line = serde_json::to_vec(&record).expect("record serialises");
            line.push(b'\n');
            file.write_all(&line).map_err(io)?;
            file.sync_data().map_err(io)?;
        }
        let index = state.records.len();
        state.judged.insert(task_id.into(), index);
        state.records.push(record);
        Ok(judgment)
    }

    /// Stored judgments in submission order.
    pub fn judgments(&self) -> Vec<ComparisonJudgment> {
        self.state.lock().expect("store lock").records.iter().map(|r| r.judgment.clone()).collect()
    }

    pub fn export(&self) -> String {
        write_judgments(&self.judgments())
    }

    pub fn progress(&self) -> Progress {
        let state = self.state.lock().expect("store lock");
        let mut per_annotator = std::collections::BTreeMap::new();
        for a in &self.session.annotators {
            let tasks: Vec<_> = self.session.tasks_for(a).collect();
            let judged = tasks.iter().filter(|t| state.judged.contains_key(&t.task_id)).count();
            per_annotator.insert(a.clone(), Count { judged, total: tasks.len() });
        }
        Progress { judged: state.records.len(), total: self.session.tasks.len(), per_annotator }
    }
}
