use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sigmoid, softplus, top1_credit, Featurizer, LinearModel, RankingQuadruple, RerankError, N_FEATURES};

/// Feature vectors of one quadruple: the optimal plan and its deficient
/// counterparts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturizedQuadruple {
    pub positive: [f64; N_FEATURES],
    pub negatives: Vec<[f64; N_FEATURES]>,
}

impl FeaturizedQuadruple {
    pub fn credit(&self, model: &LinearModel) -> f64 {
        let mut scores = vec![model.score_features(&self.positive)];
        scores.extend(self.negatives.iter().map(|n| model.score_features(n)));
        top1_credit(&scores)
    }
}

pub fn featurize_corpus(featurizer: &Featurizer, quads: &[RankingQuadruple]) -> Vec<FeaturizedQuadruple> {
    quads
        .par_iter()
        .map(|q| {
            let [opt, rest @ ..] = q.plan_texts();
            FeaturizedQuadruple {
                positive: featurizer.extract(&q.paragraph, &opt),
                negatives: rest.iter().map(|t| featurizer.extract(&q.paragraph, t)).collect(),
            }
        })
        .collect()
}

/// Pairwise cross-entropy over every (positive, negative) pair:
///
/// `-[ln P(f_i > f_j) + ln(1 - P(f_j > f_i))]` with `P(a > b) = σ(f_a - f_b)`.
///
/// Since `1 - σ(-d) = σ(d)` the two terms coincide for this model; both are
/// kept so the sum matches the two-term objective. The bias cancels in every
/// difference, so its gradient is always 0.
pub fn loss_and_gradient(model: &LinearModel, data: &[FeaturizedQuadruple]) -> (f64, Vec<f64>, f64) {
    let mut loss = 0.0;
    let mut grad = vec![0.0; model.weights.len()];
    for q in data {
        let f_pos = model.score_features(&q.positive);
        for neg in &q.negatives {
            let d = f_pos - model.score_features(neg);
            let first = softplus(-d); // -ln σ(d)
            let second = softplus(-d); // -ln(1 - σ(-d))
            loss += first + second;
            let dl_dd = -2.0 * sigmoid(-d);
            for (g, (p, n)) in grad.iter_mut().zip(q.positive.iter().zip(neg)) {
                *g += dl_dd * (p - n);
            }
        }
    }
    (loss, grad, 0.0)
}

pub fn ranking_loss(model: &LinearModel, data: &[FeaturizedQuadruple]) -> f64 {
    loss_and_gradient(model, data).0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainParams {
    /// Sized for the linear model.
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            learning_rate: 1e-2,
            batch_size: 8,
            max_epochs: 10,
            patience: 3,
            validation_fraction: 0.1,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose weights were kept (0 = initial model).
    pub best_epoch: usize,
    pub best_validation_recall: f64,
    pub stopped_early: bool,
}

/// Seeded shuffle of `0..n` split into (train, validation). Validation gets
/// `round(n * fraction)` items, at least one when `n >= 2` and the fraction
/// is positive.
pub fn split_train_validation(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut n_val = (n as f64 * fraction).round() as usize;
    if fraction > 0.0 && n >= 2 {
        n_val = n_val.clamp(1, n - 1);
    }
    let val = idx.split_off(n - n_val.min(n));
    (idx, val)
}

fn mean_credit(model: &LinearModel, data: &[FeaturizedQuadruple]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    data.iter().map(|q| q.credit(model)).sum::<f64>() / data.len() as f64
}

/// Mini-batch Adam on the pairwise loss starting from `init`, keeping the
/// weights with the best validation recall@1.
pub fn train(
    init: LinearModel,
    train_set: &[FeaturizedQuadruple],
    validation: &[FeaturizedQuadruple],
    params: &TrainParams,
) -> Result<(LinearModel, TrainReport), RerankError> {
    if train_set.is_empty() {
        return Err(RerankError::EmptyCorpus);
    }
    let eval_set = if validation.is_empty() { train_set } else { validation };
    let mut model = init;
    let mut best = model.clone();
    let mut best_recall = mean_credit(&model, eval_set);
    let mut report =
        TrainReport { epochs: Vec::new(), best_epoch: 0, best_validation_recall: best_recall, stopped_early: false };

    let dim = model.weights.len();
    let (mut m, mut v) = (vec![0.0; dim], vec![0.0; dim]);
    let mut t = 0i32;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stale = 0;

    for epoch in 1..=params.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(params.batch_size.max(1)) {
            let items: Vec<FeaturizedQuadruple> = batch.iter().map(|&i| train_set[i].clone()).collect();
            let (_, grad, _) = loss_and_gradient(&model, &items);
            t += 1;
            for k in 0..dim {
                let g = grad[k] + params.weight_decay * model.weights[k];
                m[k] = params.beta1 * m[k] + (1.0 - params.beta1) * g;
                v[k] = params.beta2 * v[k] + (1.0 - params.beta2) * g * g;
                let m_hat = m[k] / (1.0 - params.beta1.powi(t));
                let v_hat = v[k] / (1.0 - params.beta2.powi(t));
                model.weights[k] -= params.learning_rate * m_hat / (v_hat.sqrt() + params.epsilon);
            }
        }
        let train_loss = ranking_loss(&model, train_set);
        if !train_loss.is_finite() {
            return Err(RerankError::DivergenceDetected { epoch, loss: train_loss });
        }
        let recall = mean_credit(&model, eval_set);
        tracing::debug!(epoch, train_loss, recall, "epoch finished");
        report.epochs.push(EpochStats { epoch, train_loss, validation_recall: recall });
        if recall > best_recall {
            best_recall = recall;
            best = model.clone();
            report.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= params.patience {
                report.stopped_early = epoch < params.max_epochs;
                break;
            }
        }
    }
    report.best_validation_recall = best_recall;
    Ok((best, report))
}

/// Featurises `quads`, holds out a seeded validation split and trains from
/// zero weights.
pub fn fit(
    featurizer: &Featurizer,
    quads: &[RankingQuadruple],
    params: &TrainParams,
) -> Result<(LinearModel, TrainReport), RerankError> {
    let all = featurize_corpus(featurizer, quads);
    let (tr, val) = split_train_validation(all.len(), params.validation_fraction, params.seed);
    let pick = |idx: &[usize]| idx.iter().map(|&i| all[i].clone()).collect::<Vec<_>>();
    train(LinearModel::zeros(), &pick(&tr), &pick(&val), params)
}


#[cfg(test)]
mod synthetic_tests {
    use super::*;
    use crate::reranker::synthetic_corpus;

    #[test]
    fn trained_model_separates_held_out_synthetic_plans() {
        let fz = Featurizer::default();
        let all = featurize_corpus(&fz, &synthetic_corpus(250, 7));
        let (train_set, test_set) = all.split_at(200);
        let (tr, val) = split_train_validation(train_set.len(), 0.1, 0);
        let pick = |idx: &[usize]| idx.iter().map(|&i| train_set[i].clone()).collect::<Vec<_>>();
        let params = TrainParams::default();
        let (model, report) = train(LinearModel::zeros(), &pick(&tr), &pick(&val), &params).unwrap();
        let recall = mean_credit(&model, test_set);
        assert_eq!(mean_credit(&LinearModel::zeros(), test_set), 0.25);
        assert!(recall >= 0.95, "recall {recall}, {report:?}");
        let losses: Vec<f64> = report.epochs.iter().map(|e| e.train_loss).collect();
        assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{losses:?}");
    }
}
