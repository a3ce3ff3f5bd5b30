//! A seeded, template-built quadruple corpus for exercising the trainer
//! without any model calls.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::RankingQuadruple;
use crate::plan::{Action, Actor, Plan, PlanStep};

const METHODS: &[&str] = &[
    "graph attention", "contrastive pretraining", "sparse mixture routing", "kernel ridge regression",
    "beam reranking", "curriculum sampling", "latent diffusion", "spectral clustering", "dropout ensembling",
    "adapter tuning", "gradient boosting", "retrieval augmentation",
];
const TASKS: &[&str] = &[
    "protein folding", "machine translation", "tumour segmentation", "speech recognition", "fraud detection",
    "question answering", "crop yield forecasting", "code summarisation", "traffic prediction",
    "sentiment classification",
];
const DATASETS: &[&str] = &[
    "CIFAR", "WMT", "LibriSpeech", "SQuAD", "ImageNet", "PubMed", "Kinetics", "MIMIC", "CoNLL", "OpenWebText",
];
const METRICS: &[&str] = &["accuracy", "F1 score", "BLEU", "perplexity", "AUC", "word error rate"];
const GENERIC_QUESTIONS: &[&str] = &[
    "What is the main contribution?",
    "Is the work novel?",
    "Are the results convincing?",
    "How does this relate to prior work?",
    "Is the writing clear?",
];
const VAGUE_STEPS: &[&str] = &[
    "Investigator: Think about the broader picture.",
    "Reviewer: Reflect on the overall quality.",
    "Investigator: Consider the general impact of the work.",
];

#[derive(Clone, Copy)]
struct Topic {
    method: &'static str,
    task: &'static str,
    dataset: &'static str,
    metric: &'static str,
}

impl Topic {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        Topic {
            method: METHODS.choose(rng).expect("non-empty"),
            task: TASKS.choose(rng).expect("non-empty"),
            dataset: DATASETS.choose(rng).expect("non-empty"),
            metric: METRICS.choose(rng).expect("non-empty"),
        }
    }

    fn paragraph(&self, rng: &mut ChaCha8Rng) -> String {
        let gain = rng.random_range(1..15);
        format!(
            "We apply {m} to {t}. Experiments on the {d} benchmark show that {m} improves {x} by {gain} points \
             over the strongest baseline for {t}.",
            m = self.method,
            t = self.task,
            d = self.dataset,
            x = self.metric
        )
    }

    fn questions(&self) -> Vec<String> {
        vec![
            format!("How is {} applied to {}?", self.method, self.task),
            format!("Which baselines are compared on the {} benchmark?", self.dataset),
            format!("How is the {} improvement measured?", self.metric),
        ]
    }
}

fn plan(questions: impl IntoIterator<Item = String>, web_last: bool) -> Plan {
    let qs: Vec<String> = questions.into_iter().collect();
    let last = qs.len().saturating_sub(1);
    let mut steps: Vec<PlanStep> = qs
        .into_iter()
        .enumerate()
        .map(|(i, q)| {
            if web_last && i == last {
                PlanStep::answer_from_web(0, q)
            } else {
                PlanStep::answer_from_paper(0, q)
            }
        })
        .collect();
    steps.push(PlanStep::write_review(0));
    Plan::from_steps(steps)
}

fn with_vague_step(mut p: Plan, rng: &mut ChaCha8Rng) -> Plan {
    let text = VAGUE_STEPS.choose(rng).expect("non-empty").to_string();
    let actor = if text.starts_with("Reviewer") { Actor::Reviewer } else { Actor::Investigator };
    let at = rng.random_range(0..p.steps.len());
    p.steps.insert(at, PlanStep { index: 0, actor, action: Action::Undefined, question: None, text });
    Plan::from_steps(p.steps)
}

fn prose(topic: &Topic) -> String {
    format!(
        "I would first read the paper carefully to understand the {} results, then look online for related \
         work, and finally write down my impressions.",
        topic.metric
    )
}

/// `n` separable quadruples. The same seed yields the same corpus.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<RankingQuadruple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topics: Vec<Topic> = (0..n).map(|_| Topic::draw(&mut rng)).collect();
    (0..n)
        .map(|i| {
            let topic = &topics[i];
            let paragraph = topic.paragraph(&mut rng);
            let k = rng.random_range(2..=3);
            let web = rng.random_bool(0.3);
            let optimal = plan(topic.questions().into_iter().take(k), web);

            let foreign = if n > 1 { &topics[(i + 1 + rng.random_range(0..n - 1)) % n] } else { topic };
            let coherence = with_vague_step(plan(foreign.questions().into_iter().take(k), false), &mut rng);

            let generic: Vec<String> =
                GENERIC_QUESTIONS.choose_multiple(&mut rng, k).map(|q| q.to_string()).collect();
            let specificity = with_vague_step(plan(generic, false), &mut rng);

            let render = |p: Plan| {
                let text = p.text();
                Plan { source_text: text, ..p }
            };
            RankingQuadruple {
                paragraph,
                optimal: render(optimal),
                lacking_coherence: render(coherence),
                lacking_structure: prose(topic),
                lacking_specificity: render(specificity),
                provenance: None,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::validate_plan;

    #[test]
    fn corpus_is_seeded() {
        assert_eq!(synthetic_corpus(20, 4), synthetic_corpus(20, 4));
        assert_ne!(synthetic_corpus(20, 4), synthetic_corpus(20, 5));
    }

    #[test]
    fn optimal_plans_validate_and_deficient_ones_do_not() {
        for q in synthetic_corpus(50, 1) {
            assert!(validate_plan(&q.optimal).is_valid(), "{}", q.optimal.text());
            assert!(!validate_plan(&q.lacking_coherence).is_valid());
            assert!(!validate_plan(&q.lacking_specificity).is_valid());
            assert_eq!(q.plan_texts().len(), 4);
        }
    }
}
