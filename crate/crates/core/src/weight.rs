//! Exponential reachability weights normalised by a Monte Carlo mean.

use rand::Rng;

use crate::dataset::OfflineDataset;
use crate::error::{Error, Result};
use crate::reach::ReachabilityClassifier;
use crate::relabel::WeightedBatch;
use crate::scalar::Scalar;
use crate::value::GoalConditionedQ;

/// `w_i = exp(c_i) / mean_k exp(c_k)` with one denominator shared by the batch.
///
/// Computed as `exp(c_i - c_max) / mean_k exp(c_k - c_max)`, so equal scores
/// give weights of exactly one.
pub fn sampling_weights<F: Scalar>(scores: &[F]) -> Result<Vec<F>> {
    if scores.is_empty() {
        return Err(Error::Empty("score list"));
    }
    let top = scores.iter().copied().fold(F::neg_infinity(), F::max);
    let e: Vec<F> = scores.iter().map(|c| (*c - top).exp()).collect();
    let mean = e.iter().copied().fold(F::zero(), |a, b| a + b) / F::of(e.len() as f64);
    Ok(e.into_iter().map(|v| v / mean).collect())
}

/// Replaces the batch weights with reachability weights of
/// `(s_i, g_i, a_i)` under the current critic and classifier.
pub fn attach_weights<F: Scalar>(batch: &mut WeightedBatch<F>, q: &GoalConditionedQ<F>, c: &ReachabilityClassifier<F>) -> Result<()> {
    let scores = batch
        .entries
        .iter()
        .map(|e| c.score(q.q_eval(e.state, e.goal, e.action)?))
        .collect::<Result<Vec<F>>>()?;
    batch.weights = sampling_weights(&scores)?;
    Ok(())
}

/// Per-entry denominators: each entry is normalised by the mean of
/// `exp(c(s_i, g', a_i))` over `m` fresh goals drawn from the dataset.
pub fn attach_weights_per_sample<F: Scalar, R: Rng + ?Sized>(
    batch: &mut WeightedBatch<F>,
    q: &GoalConditionedQ<F>,
    c: &ReachabilityClassifier<F>,
    dataset: &OfflineDataset,
    m: usize,
    rng: &mut R,
) -> Result<()> {
    if m == 0 {
        return Err(Error::Validation("per-sample denominator needs m >= 1".into()));
    }
    let mut weights = Vec::with_capacity(batch.len());
    for e in &batch.entries {
        let num = c.score(q.q_eval(e.state, e.goal, e.action)?)?.exp();
        let mut den = F::zero();
        for g in dataset.sample_goals_uniform(m, rng)? {
            den = den + c.score(q.q_eval(e.state, g, e.action)?)?.exp();
        }
        weights.push(num / (den / F::of(m as f64)));
    }
    batch.weights = weights;
    Ok(())
}

/// Draws `len` indices with probability proportional to `weights`.
pub fn resample_indices<F: Scalar, R: Rng + ?Sized>(weights: &[F], rng: &mut R) -> Result<Vec<usize>> {
    use rand::distributions::{Distribution, WeightedIndex};
    let w: Vec<f64> = weights.iter().map(|w| w.as_f64()).collect();
    let dist = WeightedIndex::new(&w).map_err(|e| Error::Validation(format!("resampling weights: {e}")))?;
    Ok((0..weights.len()).map(|_| dist.sample(rng)).collect())
}
