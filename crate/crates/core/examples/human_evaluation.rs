//! Dominance tables and inter-annotator agreement from pairwise judgments.
//!
//! ```text
//! cargo run --example human_evaluation
//! ```

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use focused_feedback::annotation::{demo_spec, Choice, EvaluationSession, SessionStore};
use focused_feedback::metrics::{agreement_pairs, cohen_kappa, dominance, tie_rate, Criterion, DominanceTable, Outcome, TieHandling};

fn main() -> anyhow::Result<()> {
    // precomputed cells, re-totalled
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/eval/helpfulness_cells.json");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let table = DominanceTable::from_cells(serde_json::from_value(v["systems"].clone())?, serde_json::from_value(v["cells"].clone())?)?;
    println!("{}", table.render("Helpfulness"));

    // simulated annotators who prefer the first system two times in three
    let systems = ["swif2t", "gpt4", "cove"];
    let session = EvaluationSession::create(demo_spec("sim", 30, &systems, &["ann1", "ann2", "ann3"], 0.3, 5))?;
    let store = SessionStore::in_memory(session);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for task in store.session.tasks.clone() {
        let favoured = if task.system_a == "swif2t" { Some(Outcome::AWins) } else if task.system_b == "swif2t" { Some(Outcome::BWins) } else { None };
        let outcome = match (favoured, rng.random_range(0..6)) {
            (Some(o), 0..=3) => o,
            (_, 4) => Outcome::Tie,
            _ if rng.random_bool(0.5) => Outcome::AWins,
            _ => Outcome::BWins,
        };
        store.submit(&task.annotator_id, &task.task_id, Choice::reblind(outcome, task.presentation_order))?;
    }
    let judgments = store.judgments();
    let names: Vec<String> = systems.iter().map(|s| s.to_string()).collect();
    for criterion in Criterion::ALL {
        let t = dominance(&judgments, criterion, &names)?;
        println!("{}", t.render(criterion.title()));
        println!("ties {:.1}%\n", tie_rate(&judgments, criterion).unwrap_or(0.0));
    }
    let (a, b) = agreement_pairs(&judgments);
    println!("{} doubly judged items", a.len());
    println!("kappa with ties        {:+.3}", cohen_kappa(&a, &b, TieHandling::Include)?);
    println!("kappa without ties     {:+.3}", cohen_kappa(&a, &b, TieHandling::DropEither)?);
    Ok(())
}
