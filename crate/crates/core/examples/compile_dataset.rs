//! Matching review sentences to the paragraphs they quote, then keeping the
//! actionable ones with an in-scope aspect.
//!
//! ```text
//! cargo run --example compile_dataset
//! ```

use std::path::PathBuf;

use focused_feedback::dataset::{self, Classifiers, MatchParams};

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/dataset");
    let papers = dataset::load_papers(&dir.join("papers.json"))?;
    let reviews = dataset::load_reviews(&dir.join("reviews.jsonl"))?;

    let (points, report) = dataset::compile(&papers, &reviews, &Classifiers::rule_based(), &MatchParams::default())?;
    print!("{}", report.render());
    println!();
    for p in &points {
        println!("{} {:<14} {}", p.unique_id, p.human_review_aspect.to_string(), p.human_review);
    }
    Ok(())
}
