//! Alternating classifier / offline-RL training loop.
//!
//! Each step samples one batch of transitions and uses it twice: hindsight
//! and uniform relabelings train the reachability classifier with the critic
//! frozen, then the uniform relabeling (rewarded and weighted) trains the
//! critic and the actor.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Sampler, TrainerConfig, WeightMode};
use crate::dataset::{OfflineDataset, Transition};
use crate::env::{Goal, State};
use crate::error::{Error, Result};
use crate::eval::{self, PairsMode};
use crate::reach::ReachabilityClassifier;
use crate::relabel::{annotate_rewards, her_positive_batch, unlabeled_batch, LabeledBatch, Label, Sga, WeightedBatch};
use crate::scalar::{fmt_real, Scalar};
use crate::value::{GoalConditionedQ, PolicyTable, TableShape};
use crate::weight::{attach_weights, attach_weights_per_sample, resample_indices};

/// Generator used for every seeded stream.
pub type SeededRng = ChaCha8Rng;

/// Mixed into the run seed for the periodic-evaluation pair stream.
const EVAL_SEED_SALT: u64 = 0x5eed_e7a1;

pub const METRICS_HEADER: &str = "iter,pu_loss,mean_w,max_w,td_err,success_rate";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub iter: usize,
    pub pu_loss: f64,
    pub mean_w: f64,
    pub max_w: f64,
    pub td_err: f64,
    /// Only present on evaluation iterations.
    pub success_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunState<F> {
    pub q: GoalConditionedQ<F>,
    pub policy: PolicyTable<F>,
    pub classifier: ReachabilityClassifier<F>,
    pub iteration: usize,
    pub metrics: Vec<MetricsRow>,
}

impl<F: Scalar> RunState<F> {
    pub fn new(dataset: &OfflineDataset, config: &TrainerConfig) -> Result<Self> {
        config.validate()?;
        let shape = TableShape::of(dataset.maze());
        Ok(RunState {
            q: GoalConditionedQ::new(shape, F::of(config.gamma)),
            policy: PolicyTable::new(shape),
            classifier: ReachabilityClassifier::new(F::of(config.eta_p), config.pu_variant)?,
            iteration: 0,
            metrics: Vec::new(),
        })
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = format!("{METRICS_HEADER}\n");
        for r in &self.metrics {
            let sr = r.success_rate.map_or_else(|| "NaN".to_string(), fmt_real);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.iter,
                fmt_real(r.pu_loss),
                fmt_real(r.mean_w),
                fmt_real(r.max_w),
                fmt_real(r.td_err),
                sr
            );
        }
        out
    }
}

fn q_values<F: Scalar>(q: &GoalConditionedQ<F>, batch: &LabeledBatch) -> Vec<F> {
    batch.entries.iter().map(|e| q.get(e.state, e.goal, e.action)).collect()
}

/// Goals for the RL batch under the `her_ratio` sampler: the first
/// `round(fraction * N)` entries keep their hindsight goal.
fn mixed_goals(positive: &LabeledBatch, uniform: &LabeledBatch, transitions: &[Transition], fraction: f64) -> Result<LabeledBatch> {
    let n = transitions.len();
    if positive.entries.len() != n {
        return Err(Error::LengthMismatch { left: positive.entries.len(), right: n });
    }
    let k = (fraction * n as f64).round() as usize;
    let entries = (0..n)
        .map(|i| if i < k { positive.entries[i] } else { uniform.entries[i] })
        .collect::<Vec<Sga>>();
    Ok(LabeledBatch { entries, label: Label::Unlabeled })
}

/// One iteration. All fallible work happens before any parameter is
/// written, so an error leaves `state` untouched.
pub fn train_step<F: Scalar>(
    state: &mut RunState<F>,
    dataset: &OfflineDataset,
    config: &TrainerConfig,
    rng: &mut SeededRng,
) -> Result<()> {
    let n = config.batch_size;
    let transitions = dataset.sample_transitions(n, rng)?;
    let (positive, _) = her_positive_batch(dataset, &transitions, rng)?;
    let goals = dataset.sample_goals_uniform(n, rng)?;
    let unlabeled = unlabeled_batch(&transitions, &goals)?;

    // Classifier step with the critic frozen.
    let mut classifier = state.classifier;
    let q_pos = q_values(&state.q, &positive);
    let q_unl = q_values(&state.q, &unlabeled);
    let pu_loss = if state.iteration >= config.classifier_warmup_iters {
        let mut first = None;
        for _ in 0..config.classifier_steps {
            let loss = classifier.classifier_update(&q_pos, &q_unl, F::of(config.lr_c))?;
            first.get_or_insert(loss);
        }
        first.unwrap()
    } else {
        classifier.loss(&q_pos, &q_unl)?
    };

    let policy_goals = match config.sampler {
        Sampler::HerRatio => mixed_goals(&positive, &unlabeled, &transitions, config.her_fraction)?,
        Sampler::Rws | Sampler::Uniform => unlabeled,
    };
    let mut batch: WeightedBatch<F> = annotate_rewards(&policy_goals, &transitions, F::of(config.delta))?;
    if config.sampler == Sampler::Rws {
        if config.per_sample_denominator_m > 0 {
            attach_weights_per_sample(&mut batch, &state.q, &classifier, dataset, config.per_sample_denominator_m, rng)?;
        } else {
            attach_weights(&mut batch, &state.q, &classifier)?;
        }
    }
    let mean_w = batch.weights.iter().map(|w| w.as_f64()).sum::<f64>() / batch.len() as f64;
    let max_w = batch.weights.iter().map(|w| w.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    if config.weight_mode == WeightMode::Resample && config.sampler == Sampler::Rws {
        let idx = resample_indices(&batch.weights, rng)?;
        batch = WeightedBatch { entries: idx.iter().map(|i| batch.entries[*i]).collect(), weights: vec![F::one(); idx.len()] };
    }

    // Commit.
    state.classifier = classifier;
    let td_err = state.q.td_update(&batch, F::of(config.lr_q), config.weight_critic);
    state.policy.policy_update(&state.q, &batch, F::of(config.alpha), F::of(config.lr_pi));
    state.iteration += 1;
    state.metrics.push(MetricsRow {
        iter: state.iteration,
        pu_loss: pu_loss.as_f64(),
        mean_w,
        max_w,
        td_err: td_err.as_f64(),
        success_rate: None,
    });
    Ok(())
}

/// Runs `config.iterations` steps from a fresh state. Success on
/// within-trajectory pairs is recorded every `eval_every` iterations and on
/// the final one.
pub fn train<F: Scalar>(dataset: &OfflineDataset, config: &TrainerConfig) -> Result<RunState<F>> {
    let mut state = RunState::new(dataset, config)?;
    if config.iterations == 0 {
        return Ok(state);
    }
    let mut rng = SeededRng::seed_from_u64(config.seed);
    let pairs = {
        let mut eval_rng = SeededRng::seed_from_u64(config.seed ^ EVAL_SEED_SALT);
        eval::eval_pairs(dataset, PairsMode::InTrajectory, config.eval_episodes.max(1), &mut eval_rng)?
    };
    for it in 1..=config.iterations {
        train_step(&mut state, dataset, config, &mut rng)?;
        let due = it == config.iterations || (config.eval_every > 0 && it % config.eval_every == 0);
        if due {
            let rate = evaluate(&state, dataset, &pairs, config)?;
            state.metrics.last_mut().unwrap().success_rate = Some(rate);
        }
    }
    Ok(state)
}

fn evaluate<F: Scalar>(state: &RunState<F>, dataset: &OfflineDataset, pairs: &[(State, Goal)], config: &TrainerConfig) -> Result<f64> {
    eval::success_rate(&state.policy, dataset.maze(), pairs, F::of(config.delta), config.max_steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fixtures;

    fn small() -> TrainerConfig {
        TrainerConfig { iterations: 50, batch_size: 32, ..TrainerConfig::default() }
    }

    #[test]
    fn zero_iterations_returns_initial_state() {
        let d = fixtures::stitching();
        let cfg = TrainerConfig { iterations: 0, ..small() };
        let s: RunState<f64> = train(&d, &cfg).unwrap();
        assert_eq!(s, RunState::new(&d, &cfg).unwrap());
    }

    #[test]
    fn runs_are_deterministic() {
        let d = fixtures::stitching();
        let a: RunState<f64> = train(&d, &small()).unwrap();
        let b: RunState<f64> = train(&d, &small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.metrics.len(), 50);
        assert_eq!(a.metrics_csv(), b.metrics_csv());
        assert_eq!(a.metrics_csv().lines().count(), 51);
    }

    #[test]
    fn uniform_equals_rws_with_unit_weights() {
        let d = fixtures::stitching();
        // Without classifier updates the slope stays 0 and every RWS weight is exactly 1.
        let rws = TrainerConfig { classifier_warmup_iters: usize::MAX, ..small() };
        let uni = TrainerConfig { sampler: Sampler::Uniform, ..rws.clone() };
        let a: RunState<f64> = train(&d, &rws).unwrap();
        let b: RunState<f64> = train(&d, &uni).unwrap();
        assert_eq!(a.q, b.q);
        assert_eq!(a.policy, b.policy);
        assert!(a.metrics.iter().all(|m| m.mean_w == 1.0 && m.max_w == 1.0));
    }

    #[test]
    fn classifier_step_leaves_critic_untouched() {
        let d = fixtures::stitching();
        let cfg = small();
        let mut state: RunState<f64> = train(&d, &TrainerConfig { iterations: 20, ..cfg.clone() }).unwrap();
        let mut rng = SeededRng::seed_from_u64(99);
        let ts = d.sample_transitions(32, &mut rng).unwrap();
        let (pos, _) = her_positive_batch(&d, &ts, &mut rng).unwrap();
        let goals = d.sample_goals_uniform(32, &mut rng).unwrap();
        let unl = unlabeled_batch(&ts, &goals).unwrap();
        let before = state.q.clone();
        let (qp, qu) = (q_values(&state.q, &pos), q_values(&state.q, &unl));
        state.classifier.classifier_update(&qp, &qu, 0.01).unwrap();
        assert_eq!(before.raw(), state.q.raw());
    }

    #[test]
    fn failed_step_mutates_nothing() {
        let d = fixtures::stitching();
        let cfg = small();
        let mut state: RunState<f64> = RunState::new(&d, &cfg).unwrap();
        let before = state.clone();
        let empty = OfflineDataset::new(d.maze().clone(), vec![]).unwrap();
        let mut rng = SeededRng::seed_from_u64(0);
        assert!(train_step(&mut state, &empty, &cfg, &mut rng).is_err());
        assert_eq!(state, before);
    }

    #[test]
    fn her_ratio_and_resample_modes_run() {
        let d = fixtures::stitching();
        for cfg in [
            TrainerConfig { sampler: Sampler::HerRatio, ..small() },
            TrainerConfig { weight_mode: WeightMode::Resample, ..small() },
            TrainerConfig { per_sample_denominator_m: 4, ..small() },
            TrainerConfig { weight_critic: false, ..small() },
        ] {
            let s: RunState<f64> = train(&d, &cfg).unwrap();
            assert_eq!(s.iteration, 50);
            assert!(s.metrics.iter().all(|m| m.pu_loss.is_finite()));
        }
    }

    #[test]
    fn f32_training_runs() {
        let d = fixtures::stitching();
        let s: RunState<f32> = train(&d, &small()).unwrap();
        assert!(s.q.raw().iter().all(|v| *v <= 0.0 && *v >= -20.0));
    }

    #[test]
    fn mixed_goals_prefix() {
        let d = fixtures::stitching();
        let mut rng = SeededRng::seed_from_u64(5);
        let ts = d.sample_transitions(10, &mut rng).unwrap();
        let (pos, _) = her_positive_batch(&d, &ts, &mut rng).unwrap();
        let unl = unlabeled_batch(&ts, &d.sample_goals_uniform(10, &mut rng).unwrap()).unwrap();
        let m = mixed_goals(&pos, &unl, &ts, 0.3).unwrap();
        assert_eq!(&m.entries[..3], &pos.entries[..3]);
        assert_eq!(&m.entries[3..], &unl.entries[3..]);
    }
}
