//! Offline replay of a full review run: plans are drafted and re-ranked, each
//! step is investigated against the paper or the web, and the reviewer writes
//! one focused comment.
//!
//! ```text
//! cargo run --example review_paragraph
//! ```

use std::path::PathBuf;

use focused_feedback::config::RunConfig;
use focused_feedback::investigator::Corpus;

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/run_example");
    let pipeline = RunConfig::load(&dir.join("config.toml"))?.build_pipeline()?;
    let paragraph = std::fs::read_to_string(dir.join("paragraph.txt"))?;
    let paper = Corpus::load_dir(&dir.join("paper"))?;

    let result = pipeline.run_review(paragraph.trim(), &paper)?;

    println!("candidate plans:");
    for (i, c) in result.candidate_plans.iter().enumerate() {
        println!("  #{i} score {:+.4}  {} steps", c.score, c.plan.steps.len());
    }
    println!("\nselected plan:\n{}\n", result.plan.text());
    for pair in &result.context.pairs {
        println!("[{:?}] {}\n    {}", pair.source, pair.question, pair.answer.text().unwrap_or("(no answer)"));
    }
    println!("\n[{}] {}\nquote: {}", result.review.label, result.review.review_text, result.review.quoted_substring);
    Ok(())
}
