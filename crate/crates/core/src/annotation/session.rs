use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AnnotationError;
use crate::metrics::{Criterion, PresentationOrder};
use crate::text::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionExample {
    pub example_id: String,
    pub paragraph: String,
    #[serde(default)]
    pub paper_link: String,
    /// System id to review text.
    pub reviews: BTreeMap<String, String>,
}

fn all_criteria() -> Vec<Criterion> {
    Criterion::ALL.to_vec()
}

/// Session definition file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSpec {
    pub session_id: String,
    pub systems: Vec<String>,
    #[serde(default = "all_criteria")]
    pub criteria: Vec<Criterion>,
    pub annotators: Vec<String>,
    #[serde(default)]
    pub double_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    pub examples: Vec<SessionExample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    pub annotator_id: String,
    pub example_id: String,
    pub criterion: Criterion,
    pub system_a: String,
    pub system_b: String,
    pub presentation_order: PresentationOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSession {
    pub session_id: String,
    pub seed: u64,
    pub systems: Vec<String>,
    pub criteria: Vec<Criterion>,
    pub examples: Vec<SessionExample>,
    pub annotators: Vec<String>,
    /// Annotator to example ids, in assignment order.
    pub assignment: BTreeMap<String, Vec<String>>,
    pub double_annotation_set: Vec<String>,
    /// Every task, grouped by annotator in the order they are served.
    pub tasks: Vec<Task>,
}

/// Text shown to annotators for each criterion.
pub fn guideline(criterion: Criterion) -> &'static str {
    match criterion {
        Criterion::Specificity => {
            "Pick the comment that points at a concrete part of the paragraph and tells the authors what to change."
        }
        Criterion::ReadingComprehension => {
            "Pick the comment whose author has understood the paragraph and the paper around it correctly."
        }
        Criterion::Helpfulness => "Pick the comment you would rather receive as the author of this paper.",
    }
}

impl EvaluationSession {
    pub fn create(spec: SessionSpec) -> Result<Self, AnnotationError> {
        let SessionSpec { session_id, systems, criteria, annotators, double_fraction, seed, examples } = spec;
        if systems.len() < 2 {
            return Err(AnnotationError::InvalidSession("at least two systems are needed".into()));
        }
        if annotators.is_empty() {
            return Err(AnnotationError::InvalidSession("the annotator roster is empty".into()));
        }
        if criteria.is_empty() {
            return Err(AnnotationError::InvalidSession("no criteria".into()));
        }
        let unique = |v: &[String]| v.iter().collect::<BTreeSet<_>>().len() == v.len();
        if !unique(&systems) || !unique(&annotators) || !unique(&examples.iter().map(|e| e.example_id.clone()).collect::<Vec<_>>()) {
            return Err(AnnotationError::InvalidSession("duplicate system, annotator or example id".into()));
        }
        for ex in &examples {
            for s in &systems {
                if ex.reviews.get(s).is_none_or(|r| r.trim().is_empty()) {
                    return Err(AnnotationError::MissingReview { example_id: ex.example_id.clone(), system: s.clone() });
                }
            }
        }
        if !(0.0..=1.0).contains(&double_fraction) {
            return Err(AnnotationError::InvalidSession(format!("double_fraction {double_fraction} outside [0, 1]")));
        }
        let n_double = (examples.len() as f64 * double_fraction).round() as usize;
        if n_double > 0 && annotators.len() < 2 {
            return Err(AnnotationError::InvalidSession("double annotation needs two annotators".into()));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut rng);
        let mut assignment: BTreeMap<String, Vec<String>> = annotators.iter().map(|a| (a.clone(), Vec::new())).collect();
        for (slot, &i) in order.iter().enumerate() {
            let first = slot % annotators.len();
            assignment.get_mut(&annotators[first]).unwrap().push(examples[i].example_id.clone());
        }
        let mut double_annotation_set = Vec::with_capacity(n_double);
        for (slot, &i) in order.iter().enumerate().take(n_double) {
            let second = (slot + 1 + slot / annotators.len()) % annotators.len();
            let second = if second == slot % annotators.len() { (second + 1) % annotators.len() } else { second };
            assignment.get_mut(&annotators[second]).unwrap().push(examples[i].example_id.clone());
            double_annotation_set.push(examples[i].example_id.clone());
        }

        let mut tasks = Vec::new();
        for annotator in &annotators {
            let mut mine = Vec::new();
            for example_id in &assignment[annotator] {
                for (i, a) in systems.iter().enumerate() {
                    for b in &systems[i + 1..] {
                        for &criterion in &criteria {
                            let presentation_order = if rng.random::<bool>() { PresentationOrder::AB } else { PresentationOrder::BA };
                            let key = format!("{session_id}\u{1f}{seed}\u{1f}{annotator}\u{1f}{example_id}\u{1f}{a}\u{1f}{b}\u{1f}{criterion:?}");
                            mine.push(Task {
                                task_id: sha256_hex(key.as_bytes())[..16].to_string(),
                                annotator_id: annotator.clone(),
                                example_id: example_id.clone(),
                                criterion,
                                system_a: a.clone(),
                                system_b: b.clone(),
                                presentation_order,
                            });
                        }
                    }
                }
            }
            mine.shuffle(&mut rng);
            tasks.extend(mine);
        }
        Ok(EvaluationSession { session_id, seed, systems, criteria, examples, annotators, assignment, double_annotation_set, tasks })
    }

    pub fn tasks_per_example(&self) -> usize {
        let k = self.systems.len();
        k * (k - 1) / 2 * self.criteria.len()
    }

    /// Comparisons on the doubly annotated examples, counted once.
    pub fn agreement_task_count(&self) -> usize {
        self.double_annotation_set.len() * self.tasks_per_example()
    }

    pub fn example(&self, id: &str) -> Option<&SessionExample> {
        self.examples.iter().find(|e| e.example_id == id)
    }

    pub fn task(&self, id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.task_id == id)
    }

    pub fn tasks_for<'a>(&'a self, annotator: &'a str) -> impl Iterator<Item = &'a Task> + 'a {
        self.tasks.iter().filter(move |t| t.annotator_id == annotator)
    }

    pub fn card(&self, task: &Task) -> TaskCard {
        let ex = self.example(&task.example_id).expect("tasks reference session examples");
        let (left, right) = match task.presentation_order {
            PresentationOrder::AB => (&task.system_a, &task.system_b),
            PresentationOrder::BA => (&task.system_b, &task.system_a),
        };
        TaskCard {
            task_id: task.task_id.clone(),
            paragraph: ex.paragraph.clone(),
            paper_link: ex.paper_link.clone(),
            review_left: ex.reviews[left].clone(),
            review_right: ex.reviews[right].clone(),
            criterion: task.criterion,
            guideline: guideline(task.criterion).to_string(),
        }
    }
}

/// What an annotator sees. Carries no system identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskCard {
    pub task_id: String,
    pub paragraph: String,
    pub paper_link: String,
    pub review_left: String,
    pub review_right: String,
    pub criterion: Criterion,
    pub guideline: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Choice {
    Left,
    Right,
    Tie,
}

impl Choice {
    pub fn deblind(self, order: PresentationOrder) -> crate::metrics::Outcome {
        use crate::metrics::Outcome;
        match (self, order) {
            (Choice::Tie, _) => Outcome::Tie,
            (Choice::Left, PresentationOrder::AB) | (Choice::Right, PresentationOrder::BA) => Outcome::AWins,
            (Choice::Right, PresentationOrder::AB) | (Choice::Left, PresentationOrder::BA) => Outcome::BWins,
        }
    }

    pub fn reblind(outcome: crate::metrics::Outcome, order: PresentationOrder) -> Choice {
        [Choice::Left, Choice::Right, Choice::Tie].into_iter().find(|c| c.deblind(order) == outcome).expect("deblind is onto")
    }
}

/// A synthetic session: `n_examples` examples, reviews named after their
/// system so blindness can be scanned for.
pub fn demo_spec(session_id: &str, n_examples: usize, systems: &[&str], annotators: &[&str], double_fraction: f64, seed: u64) -> SessionSpec {
    SessionSpec {
        session_id: session_id.into(),
        systems: systems.iter().map(|s| s.to_string()).collect(),
        criteria: all_criteria(),
        annotators: annotators.iter().map(|s| s.to_string()).collect(),
        double_fraction,
        seed,
        examples: (0..n_examples)
            .map(|i| SessionExample {
                example_id: format!("ex{i:03}"),
                paragraph: format!("Paragraph {i} describes an experiment on dataset number {i}."),
                paper_link: format!("https://example.org/paper/{i}"),
                reviews: systems
                    .iter()
                    .enumerate()
                    .map(|(k, s)| (s.to_string(), format!("Comment {k} on paragraph {i}: the evaluation needs a second dataset.")))
                    .collect(),
            })
            .collect(),
    }
}
