//! Tabular goal-conditioned critic and categorical actor.

use crate::env::{Action, Goal, Maze, State};
use crate::error::{Error, Result};
use crate::relabel::WeightedBatch;
use crate::scalar::Scalar;

const NA: usize = Action::COUNT;

/// Shared `(state cell, goal cell, action)` layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableShape {
    pub width: usize,
    pub height: usize,
}

impl TableShape {
    pub fn of(maze: &Maze) -> Self {
        TableShape { width: maze.width(), height: maze.height() }
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn len(&self) -> usize {
        self.n_cells() * self.n_cells() * NA
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    fn row(&self, s: State, g: Goal) -> usize {
        let n = self.n_cells();
        ((s.y * self.width + s.x) * n + (g.y * self.width + g.x)) * NA
    }

    fn check(&self, s: State, g: Goal) -> Result<()> {
        if s.x >= self.width || s.y >= self.height || g.x >= self.width || g.y >= self.height {
            return Err(Error::Index(format!("state {s} / goal {g} outside {}x{}", self.width, self.height)));
        }
        Ok(())
    }
}

/// `Q(s, g, a)` with every entry in `[-1/(1-gamma), 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalConditionedQ<F> {
    shape: TableShape,
    gamma: F,
    table: Vec<F>,
}

impl<F: Scalar> GoalConditionedQ<F> {
    /// Pessimistic initialisation at the lower bound `-1/(1-gamma)`.
    pub fn new(shape: TableShape, gamma: F) -> Self {
        assert!(gamma >= F::zero() && gamma < F::one(), "gamma must lie in [0, 1)");
        let floor = -F::one() / (F::one() - gamma);
        GoalConditionedQ { shape, gamma, table: vec![floor; shape.len()] }
    }

    pub(crate) fn from_raw(shape: TableShape, gamma: F, table: Vec<F>) -> Result<Self> {
        if table.len() != shape.len() {
            return Err(Error::LengthMismatch { left: table.len(), right: shape.len() });
        }
        if !(gamma >= F::zero() && gamma < F::one()) {
            return Err(Error::Validation(format!("gamma {gamma} outside [0, 1)")));
        }
        let q = GoalConditionedQ { shape, gamma, table };
        let (lo, hi) = (q.floor(), F::zero());
        if q.table.iter().any(|v| !(*v >= lo && *v <= hi)) {
            return Err(Error::Validation("Q entry outside [-1/(1-gamma), 0]".into()));
        }
        Ok(q)
    }

    pub fn shape(&self) -> TableShape {
        self.shape
    }

    pub fn gamma(&self) -> F {
        self.gamma
    }

    pub fn floor(&self) -> F {
        -F::one() / (F::one() - self.gamma)
    }

    pub fn raw(&self) -> &[F] {
        &self.table
    }

    pub fn q_eval(&self, s: State, g: Goal, a: Action) -> Result<F> {
        self.shape.check(s, g)?;
        Ok(self.get(s, g, a))
    }

    #[inline]
    pub fn get(&self, s: State, g: Goal, a: Action) -> F {
        self.table[self.shape.row(s, g) + a.index()]
    }

    /// The four action values at `(s, g)`.
    #[inline]
    pub fn values(&self, s: State, g: Goal) -> [F; NA] {
        let r = self.shape.row(s, g);
        [self.table[r], self.table[r + 1], self.table[r + 2], self.table[r + 3]]
    }

    pub fn max_value(&self, s: State, g: Goal) -> F {
        self.values(s, g).into_iter().fold(F::neg_infinity(), F::max)
    }

    pub fn set(&mut self, s: State, g: Goal, a: Action, v: F) {
        let lo = self.floor();
        let i = self.shape.row(s, g) + a.index();
        self.table[i] = v.max(lo).min(F::zero());
    }

    /// Q-learning backup over the batch, entry by entry:
    /// `q += lr * w * (r + gamma * (1 - done) * max_a' q(s', g, a') - q)`,
    /// clamped into the value range. With `weighted = false` every `w` is one.
    ///
    /// Returns the mean absolute TD error before each update.
    pub fn td_update(&mut self, batch: &WeightedBatch<F>, lr: F, weighted: bool) -> F {
        let lo = self.floor();
        let mut err_sum = F::zero();
        for (e, w) in batch.entries.iter().zip(&batch.weights) {
            let w = if weighted { *w } else { F::one() };
            let bootstrap = if e.done { F::zero() } else { self.gamma * self.max_value(e.next, e.goal) };
            let target = e.reward + bootstrap;
            let i = self.shape.row(e.state, e.goal) + e.action.index();
            let td = target - self.table[i];
            err_sum = err_sum + td.abs();
            self.table[i] = (self.table[i] + lr * w * td).max(lo).min(F::zero());
        }
        if batch.is_empty() {
            F::zero()
        } else {
            err_sum / F::of(batch.len() as f64)
        }
    }
}

/// Per-`(s, g)` action logits of a softmax policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable<F> {
    shape: TableShape,
    logits: Vec<F>,
}

impl<F: Scalar> PolicyTable<F> {
    pub fn new(shape: TableShape) -> Self {
        PolicyTable { shape, logits: vec![F::zero(); shape.len()] }
    }

    pub(crate) fn from_raw(shape: TableShape, logits: Vec<F>) -> Result<Self> {
        if logits.len() != shape.len() {
            return Err(Error::LengthMismatch { left: logits.len(), right: shape.len() });
        }
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("policy logit".into()));
        }
        Ok(PolicyTable { shape, logits })
    }

    pub fn shape(&self) -> TableShape {
        self.shape
    }

    pub fn raw(&self) -> &[F] {
        &self.logits
    }

    #[inline]
    pub fn logits(&self, s: State, g: Goal) -> [F; NA] {
        let r = self.shape.row(s, g);
        [self.logits[r], self.logits[r + 1], self.logits[r + 2], self.logits[r + 3]]
    }

    pub fn set_logits(&mut self, s: State, g: Goal, v: [F; NA]) {
        let r = self.shape.row(s, g);
        self.logits[r..r + NA].copy_from_slice(&v);
    }

    pub fn probs(&self, s: State, g: Goal) -> [F; NA] {
        softmax(&self.logits(s, g))
    }

    /// Greedy action; ties go to the earliest action in enumeration order.
    pub fn policy_action(&self, s: State, g: Goal) -> Action {
        let l = self.logits(s, g);
        let mut best = 0;
        for i in 1..NA {
            if l[i] > l[best] {
                best = i;
            }
        }
        Action::ALL[best]
    }

    /// One gradient step per entry on
    /// `w * (-sum_a pi(a) q(s,g,a) + alpha * -log pi(a_data))`.
    pub fn policy_update(&mut self, q: &GoalConditionedQ<F>, batch: &WeightedBatch<F>, alpha: F, lr: F) {
        for (e, w) in batch.entries.iter().zip(&batch.weights) {
            let r = self.shape.row(e.state, e.goal);
            let logits = self.logits(e.state, e.goal);
            let grad = policy_loss_grad(&logits, &q.values(e.state, e.goal), e.action, alpha, *w);
            for (i, g) in grad.iter().enumerate() {
                self.logits[r + i] = self.logits[r + i] - lr * *g;
            }
        }
    }
}

pub fn softmax<F: Scalar>(logits: &[F; NA]) -> [F; NA] {
    let m = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let e = logits.map(|l| (l - m).exp());
    let z = e.iter().copied().fold(F::zero(), |a, b| a + b);
    e.map(|v| v / z)
}

/// Per-sample actor loss: expected Q under the policy (negated) plus
/// `alpha` times the negative log-likelihood of the dataset action.
pub fn policy_loss<F: Scalar>(logits: &[F; NA], q: &[F; NA], data_action: Action, alpha: F, w: F) -> F {
    let p = softmax(logits);
    let expected_q = p.iter().zip(q).fold(F::zero(), |acc, (p, q)| acc + *p * *q);
    let m = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let log_z = m + logits.iter().fold(F::zero(), |acc, l| acc + (*l - m).exp()).ln();
    let nll = log_z - logits[data_action.index()];
    w * (-expected_q + alpha * nll)
}

/// Analytic gradient of [`policy_loss`] w.r.t. the logits.
pub fn policy_loss_grad<F: Scalar>(logits: &[F; NA], q: &[F; NA], data_action: Action, alpha: F, w: F) -> [F; NA] {
    let p = softmax(logits);
    let expected_q = p.iter().zip(q).fold(F::zero(), |acc, (p, q)| acc + *p * *q);
    let mut g = [F::zero(); NA];
    for b in 0..NA {
        let onehot = if b == data_action.index() { F::one() } else { F::zero() };
        g[b] = w * (-(p[b] * (q[b] - expected_q)) + alpha * (p[b] - onehot));
    }
    g
}
