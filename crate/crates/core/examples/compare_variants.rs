//! The same paragraph through the full pipeline and the three baselines,
//! with the number of model calls each one spends.
//!
//! ```text
//! cargo run --example compare_variants
//! ```

use std::path::PathBuf;

use focused_feedback::config::RunConfig;
use focused_feedback::investigator::Corpus;
use focused_feedback::orchestrator::Variant;

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/run_example");
    let paragraph = std::fs::read_to_string(dir.join("paragraph.txt"))?;
    let paper = Corpus::load_dir(&dir.join("paper"))?;

    for variant in [Variant::Swif2t, Variant::NoRerank, Variant::Gpt4, Variant::Cove] {
        let mut config = RunConfig::load(&dir.join("config.toml"))?;
        config.orchestrator.variant = variant;
        let pipeline = config.build_pipeline()?;
        let result = pipeline.run_review(paragraph.trim(), &paper)?;
        println!(
            "{:<10} calls {:>2}  plans {}  context {}  [{}]",
            format!("{variant:?}"),
            pipeline.llm.calls_used(),
            result.candidate_plans.len(),
            result.context.pairs.len(),
            result.review.label
        );
    }
    Ok(())
}
