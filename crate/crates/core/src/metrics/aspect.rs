use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::aspect::Aspect;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// Set when a ratio was 0/0 and reported as 0.
    pub undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectReport {
    pub accuracy: f64,
    pub per_aspect: BTreeMap<Aspect, ClassScore>,
}

fn ratio(num: usize, den: usize, undefined: &mut bool) -> f64 {
    if den == 0 {
        *undefined = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Exact-match accuracy and one-vs-rest scores for each in-scope aspect.
pub fn aspect_scores(predictions: &[Aspect], golds: &[Aspect]) -> Result<AspectReport, MetricError> {
    if predictions.len() != golds.len() {
        return Err(MetricError::LengthMismatch { left: predictions.len(), right: golds.len() });
    }
    if golds.is_empty() {
        return Err(MetricError::Empty);
    }
    let correct = predictions.iter().zip(golds).filter(|(p, g)| p == g).count();
    let per_aspect = Aspect::IN_SCOPE
        .iter()
        .map(|&a| {
            let tp = predictions.iter().zip(golds).filter(|(p, g)| **p == a && **g == a).count();
            let predicted = predictions.iter().filter(|&&p| p == a).count();
            let support = golds.iter().filter(|&&g| g == a).count();
            let mut undefined = false;
            let precision = ratio(tp, predicted, &mut undefined);
            let recall = ratio(tp, support, &mut undefined);
            let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
            (a, ClassScore { precision, recall, f1, support, undefined })
        })
        .collect();
    Ok(AspectReport { accuracy: correct as f64 / golds.len() as f64, per_aspect })
}
