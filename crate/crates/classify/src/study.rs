//! Impurity-based feature ranking and the top-k retraining study.

use serde::{Deserialize, Serialize};

use loopgrade_core::datagen::LabeledSample;
use loopgrade_core::features::FEATURE_COUNT;

use crate::model::State;
use crate::{evaluate, train, ClassifyError, Hyper, Model, Samples};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    /// Zero-based CPI index.
    pub feature: usize,
    pub score: f64,
}

/// All 30 CPIs ranked by normalized impurity decrease, descending, ties by
/// index. Features the model does not read score zero. A model without
/// any split scores zero everywhere.
pub fn feature_importance(model: &Model) -> Result<Vec<Importance>, ClassifyError> {
    let d = model.features.len();
    let raw = match &model.state {
        State::Tree(t) => t.importance.clone(),
        State::Forest(f) => f.importance(d),
        State::Boost(b) => b.importance(d),
        State::Constant { .. } if model.kind.is_tree_based() => vec![0.0; d],
        _ => return Err(ClassifyError::NotTreeBased(model.kind)),
    };
    let total: f64 = raw.iter().sum();
    let mut scores = vec![0.0; FEATURE_COUNT];
    for (&f, v) in model.features.iter().zip(&raw) {
        scores[f] = if total > 0.0 { v / total } else { 0.0 };
    }
    let mut ranked: Vec<Importance> = scores
        .into_iter()
        .enumerate()
        .map(|(feature, score)| Importance { feature, score })
        .collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.feature.cmp(&b.feature)));
    Ok(ranked)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopkPoint {
    pub k: usize,
    /// Selected CPIs in original index order.
    pub features: Vec<usize>,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopkStudy {
    pub hyper: Hyper,
    pub ranking: Vec<Importance>,
    pub full_accuracy: f64,
    pub points: Vec<TopkPoint>,
}

/// Ranks features with a full 30-feature model, then retrains on each
/// top-`k` subset and evaluates on `validation`.
pub fn topk_study(
    hyper: Hyper,
    training: &[LabeledSample],
    validation: &[LabeledSample],
    ks: &[usize],
    seed: u64,
) -> Result<TopkStudy, ClassifyError> {
    if !hyper.kind().is_tree_based() {
        return Err(ClassifyError::NotTreeBased(hyper.kind()));
    }
    let all: Vec<usize> = (0..FEATURE_COUNT).collect();
    let full = train(hyper, &Samples::from_labeled(training, &all)?, seed)?;
    let full_accuracy = evaluate(&full, &Samples::from_labeled(validation, &all)?)?.accuracy;
    let ranking = feature_importance(&full)?;
    let mut points = Vec::new();
    for &k in ks {
        let k = k.clamp(1, FEATURE_COUNT);
        let mut features: Vec<usize> = ranking[..k].iter().map(|r| r.feature).collect();
        features.sort_unstable();
        let model = train(hyper, &Samples::from_labeled(training, &features)?, seed)?;
        let accuracy = evaluate(&model, &Samples::from_labeled(validation, &features)?)?.accuracy;
        points.push(TopkPoint {
            k,
            features,
            accuracy,
        });
    }
    Ok(TopkStudy {
        hyper,
        ranking,
        full_accuracy,
        points,
    })
}
