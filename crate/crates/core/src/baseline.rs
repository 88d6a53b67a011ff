//! Permutation feature importance, an importance-only baseline.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimator::EstimatorConfig;
use crate::model::{batch_predict, Predictor};
use crate::space::{Context, FeatureSpace, OutputSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScore {
    pub feature: String,
    pub score: f64,
}

/// Mean absolute change of output `j` when one feature's column is
/// shuffled across the reference contexts, per feature in space order.
///
/// Scores are normalized to sum to 1 unless they are all zero. The shuffle
/// is driven by `config.seed`.
pub fn permutation_importance(
    model: &dyn Predictor,
    space: &FeatureSpace,
    contexts: &[Context],
    output: &OutputSpec,
    config: &EstimatorConfig,
) -> Result<Vec<FeatureScore>> {
    if contexts.len() < 2 {
        return Err(Error::InvalidArgument(
            "permutation importance needs at least 2 reference contexts".into(),
        ));
    }
    if output.index() >= model.n_outputs() {
        return Err(Error::UnknownOutput(output.name().to_string()));
    }
    let j = output.index();
    let rows: Vec<Vec<f64>> = contexts.iter().map(|c| c.values().to_vec()).collect();
    let baseline = batch_predict(model, &rows)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut scores = Vec::with_capacity(space.len());
    for (f, feature) in space.features().iter().enumerate() {
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.shuffle(&mut rng);
        let permuted: Vec<Vec<f64>> = rows
            .iter()
            .zip(&order)
            .map(|(row, &src)| {
                let mut row = row.clone();
                row[f] = rows[src][f];
                row
            })
            .collect();
        let predicted = batch_predict(model, &permuted)?;
        let change = predicted
            .iter()
            .zip(&baseline)
            .map(|(p, b)| (p[j] - b[j]).abs())
            .sum::<f64>()
            / rows.len() as f64;
        scores.push(FeatureScore {
            feature: feature.name().to_string(),
            score: change,
        });
    }
    let total: f64 = scores.iter().map(|s| s.score).sum();
    if total > 0.0 {
        for s in &mut scores {
            s.score /= total;
        }
    }
    Ok(scores)
}

/// Feature names by descending score, ties by name.
pub fn ranking(scores: &[FeatureScore]) -> Vec<&str> {
    let mut sorted: Vec<&FeatureScore> = scores.iter().collect();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.feature.cmp(&b.feature)));
    sorted.into_iter().map(|s| s.feature.as_str()).collect()
}
