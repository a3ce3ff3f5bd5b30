//! Sentence-level METEOR, BLEU@4 and ROUGE-L, plus per-aspect F1.
//!
//! ```text
//! cargo run --example text_metrics
//! ```

use focused_feedback::aspect::Aspect;
use focused_feedback::metrics::{aspect_scores, bleu4, meteor, rouge_l, text_scores, Smoothing};
use focused_feedback::text::tokenize;

fn main() -> anyhow::Result<()> {
    let generated = "The ablation omits the planner, so the gain cannot be attributed.";
    let reference = "Without an ablation of the planner the reported gain cannot be attributed to it.";
    let (c, r) = (tokenize(generated), tokenize(reference));
    println!("meteor  {:.4}", meteor(&c, &r));
    println!("bleu4   {:.4} (unsmoothed {:.4})", bleu4(&c, &[&r], Smoothing::default())?, bleu4(&c, &[&r], Smoothing::None)?);
    println!("rouge-l {:.4}", rouge_l(&c, &r));

    let mean = text_scores([(generated, reference), (reference, reference)], Smoothing::default())?;
    println!("mean over two pairs: {mean:?}");

    let predicted = [Aspect::Soundness, Aspect::Replicability, Aspect::Soundness, Aspect::Substance];
    let gold = [Aspect::Soundness, Aspect::Soundness, Aspect::Replicability, Aspect::Substance];
    let report = aspect_scores(&predicted, &gold)?;
    println!("aspect accuracy {:.2}", report.accuracy);
    for (aspect, s) in &report.per_aspect {
        if s.support > 0 {
            println!("  {:<36} p {:.2} r {:.2} f1 {:.2} n {}", aspect.to_string(), s.precision, s.recall, s.f1, s.support);
        }
    }
    Ok(())
}
