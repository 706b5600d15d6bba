//! Positive (hindsight) and unlabeled (uniform-goal) batches, and the
//! reward-annotated batch consumed by the RL update.

use rand::Rng;

use crate::dataset::{OfflineDataset, Transition};
use crate::env::{is_terminal, phi, reward, Action, Goal, State};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Positive,
    Unlabeled,
}

/// A state-goal-action triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sga {
    pub state: State,
    pub goal: Goal,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledBatch {
    pub entries: Vec<Sga>,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyEntry<F> {
    pub state: State,
    pub action: Action,
    pub goal: Goal,
    pub reward: F,
    pub next: State,
    pub done: bool,
}

/// Relabeled transitions with rewards and per-entry weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedBatch<F> {
    pub entries: Vec<PolicyEntry<F>>,
    pub weights: Vec<F>,
}

impl<F: Scalar> WeightedBatch<F> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn reset_weights(&mut self) {
        self.weights = vec![F::one(); self.entries.len()];
    }
}

/// Hindsight relabeling with the "future" strategy: for a transition at step
/// `i` of a trajectory of length `L`, `h` is uniform on `{i+1, ..., L}` and the
/// positive entry is `(s_i, phi(s_h), a_i)`.
///
/// Returns the batch and the number of transitions skipped because their
/// trajectory has no transitions.
pub fn her_positive_batch<R: Rng + ?Sized>(
    dataset: &OfflineDataset,
    transitions: &[Transition],
    rng: &mut R,
) -> Result<(LabeledBatch, usize)> {
    let mut skipped = 0;
    let mut entries = Vec::with_capacity(transitions.len());
    for t in transitions {
        let traj = dataset
            .trajectories()
            .get(t.traj)
            .ok_or_else(|| Error::Index(format!("trajectory {}", t.traj)))?;
        let len = traj.len();
        if len == 0 || t.step >= len {
            skipped += 1;
            continue;
        }
        let h = rng.gen_range(t.step + 1..=len);
        entries.push(Sga { state: t.state, goal: phi(traj.states[h]), action: t.action });
    }
    if entries.is_empty() {
        return Err(Error::Empty("positive batch"));
    }
    Ok((LabeledBatch { entries, label: Label::Positive }, skipped))
}

/// Pairs each transition with an independently drawn goal.
pub fn unlabeled_batch(transitions: &[Transition], goals: &[Goal]) -> Result<LabeledBatch> {
    if transitions.len() != goals.len() {
        return Err(Error::LengthMismatch { left: transitions.len(), right: goals.len() });
    }
    if transitions.is_empty() {
        return Err(Error::Empty("unlabeled batch"));
    }
    let entries = transitions
        .iter()
        .zip(goals)
        .map(|(t, g)| Sga { state: t.state, goal: *g, action: t.action })
        .collect();
    Ok(LabeledBatch { entries, label: Label::Unlabeled })
}

/// Sparse reward and termination evaluated on the successor state. Weights
/// start at one.
pub fn annotate_rewards<F: Scalar>(batch: &LabeledBatch, transitions: &[Transition], delta: F) -> Result<WeightedBatch<F>> {
    if batch.entries.len() != transitions.len() {
        return Err(Error::LengthMismatch { left: batch.entries.len(), right: transitions.len() });
    }
    let entries = batch
        .entries
        .iter()
        .zip(transitions)
        .map(|(e, t)| {
            if e.state != t.state || e.action != t.action {
                return Err(Error::Mismatch(format!(
                    "batch entry ({}, {:?}) not aligned with transition ({}, {:?})",
                    e.state, e.action, t.state, t.action
                )));
            }
            Ok(PolicyEntry {
                state: e.state,
                action: e.action,
                goal: e.goal,
                reward: reward(t.next, e.goal, delta),
                next: t.next,
                done: is_terminal(t.next, e.goal, delta),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let weights = vec![F::one(); entries.len()];
    Ok(WeightedBatch { entries, weights })
}
