//! Fitting the linear plan re-ranker on the synthetic corpus and comparing
//! held-out recall@1 with untrained and random scorers.
//!
//! ```text
//! cargo run --release --example train_reranker
//! ```

use focused_feedback::reranker::{fit, recall_at_1, synthetic_corpus, Featurizer, LinearModel, NativeScorer, RandomScorer, TrainParams};

fn main() -> anyhow::Result<()> {
    let mut corpus = synthetic_corpus(250, 7);
    let held_out = corpus.split_off(200);
    let featurizer = Featurizer::default();

    let (model, report) = fit(&featurizer, &corpus, &TrainParams::default())?;
    for e in report.epochs.iter().step_by(5) {
        println!("epoch {:>3}  loss {:.4}  validation recall@1 {:.3}", e.epoch, e.train_loss, e.validation_recall);
    }
    println!("best epoch {}", report.best_epoch);

    let untrained = recall_at_1(&NativeScorer { model: LinearModel::zeros(), featurizer: featurizer.clone() }, &held_out)?;
    let random = recall_at_1(&RandomScorer { seed: 1 }, &held_out)?;
    let trained = recall_at_1(&NativeScorer { model, featurizer }, &held_out)?;
    println!("held-out recall@1: trained {trained:.3}, untrained {untrained:.3}, random {random:.3}");
    Ok(())
}
