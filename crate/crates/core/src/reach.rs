//! Linear-logistic reachability classifier over scalar Q-values, trained with
//! a non-negative positive-unlabeled risk.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Pre-activations are clamped to this magnitude so scores stay inside (0, 1).
pub const LOGIT_CLAMP: f64 = 30.0;

/// Which form of the PU risk to minimise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PuVariant {
    /// `eta_p E_P[-log c] + max(0, E_U[-log(1-c)] - eta_p E_P[-log(1-c)])`;
    /// non-negative by construction.
    #[default]
    StandardNnpu,
    /// `-[eta_p E_P[log c] + max(E_U[log(1-c)] - eta_p E_P[log(1-c)], 0)]`,
    /// the bracketed form with the negation outside the max. Unbounded below.
    PaperLiteral,
}

impl PuVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            PuVariant::StandardNnpu => "standard_nnpu",
            PuVariant::PaperLiteral => "paper_literal",
        }
    }
}

impl fmt::Display for PuVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PuVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "standard_nnpu" => Ok(PuVariant::StandardNnpu),
            "paper_literal" => Ok(PuVariant::PaperLiteral),
            other => Err(format!("expected standard_nnpu or paper_literal, got `{other}`")),
        }
    }
}

#[inline]
fn sigmoid<F: Scalar>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

fn mean<F: Scalar>(xs: impl Iterator<Item = F>, n: usize) -> F {
    xs.fold(F::zero(), |a, b| a + b) / F::of(n as f64)
}

/// Risk from precomputed scores.
pub fn pu_loss<F: Scalar>(pos_scores: &[F], unl_scores: &[F], eta_p: F, variant: PuVariant) -> Result<F> {
    if pos_scores.is_empty() {
        return Err(Error::Empty("positive scores"));
    }
    if unl_scores.is_empty() {
        return Err(Error::Empty("unlabeled scores"));
    }
    let pos_hit = mean(pos_scores.iter().map(|c| -c.ln()), pos_scores.len());
    let pos_miss = mean(pos_scores.iter().map(|c| -(F::one() - *c).ln()), pos_scores.len());
    let unl_miss = mean(unl_scores.iter().map(|c| -(F::one() - *c).ln()), unl_scores.len());
    Ok(match variant {
        PuVariant::StandardNnpu => eta_p * pos_hit + (unl_miss - eta_p * pos_miss).max(F::zero()),
        // -[ -eta_p*pos_hit + max(-unl_miss + eta_p*pos_miss, 0) ]
        PuVariant::PaperLiteral => eta_p * pos_hit - (eta_p * pos_miss - unl_miss).max(F::zero()),
    })
}

/// `c(q) = sigmoid(slope * q + intercept)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachabilityClassifier<F> {
    pub slope: F,
    pub intercept: F,
    pub eta_p: F,
    pub variant: PuVariant,
}

/// Loss value and its gradient w.r.t. `(slope, intercept)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PuGradient<F> {
    pub loss: F,
    pub d_slope: F,
    pub d_intercept: F,
    /// The max-operator selected its zero branch.
    pub clamped: bool,
}

impl<F: Scalar> ReachabilityClassifier<F> {
    pub fn new(eta_p: F, variant: PuVariant) -> Result<Self> {
        if !(eta_p > F::zero() && eta_p < F::one()) {
            return Err(Error::Validation(format!("eta_p {eta_p} outside (0, 1)")));
        }
        Ok(ReachabilityClassifier { slope: F::zero(), intercept: F::zero(), eta_p, variant })
    }

    #[inline]
    fn logit(&self, q: F) -> (F, bool) {
        let z = self.slope * q + self.intercept;
        let lim = F::of(LOGIT_CLAMP);
        if z > lim {
            (lim, true)
        } else if z < -lim {
            (-lim, true)
        } else {
            (z, false)
        }
    }

    pub fn score(&self, q: F) -> Result<F> {
        if !q.is_finite() {
            return Err(Error::NonFinite(format!("Q-value {q}")));
        }
        Ok(self.score_unchecked(q))
    }

    #[inline]
    pub(crate) fn score_unchecked(&self, q: F) -> F {
        sigmoid(self.logit(q).0)
    }

    /// Risk computed from logits, which stays accurate for saturated scores.
    pub fn loss(&self, q_pos: &[F], q_unl: &[F]) -> Result<F> {
        Ok(self.gradient(q_pos, q_unl)?.loss)
    }

    /// Risk and analytic gradient; Q-values enter as constants. A branch of
    /// the max that is clamped to zero contributes no gradient.
    pub fn gradient(&self, q_pos: &[F], q_unl: &[F]) -> Result<PuGradient<F>> {
        if q_pos.is_empty() {
            return Err(Error::Empty("positive Q-values"));
        }
        if q_unl.is_empty() {
            return Err(Error::Empty("unlabeled Q-values"));
        }
        if let Some(q) = q_pos.iter().chain(q_unl).find(|q| !q.is_finite()) {
            return Err(Error::NonFinite(format!("Q-value {q}")));
        }
        let np = F::of(q_pos.len() as f64);
        let nu = F::of(q_unl.len() as f64);

        // Per term: (mean value, d/dslope, d/dintercept).
        // d(-log c)/dz = -(1 - c);  d(-log(1 - c))/dz = c.
        let (mut hit, mut hit_a, mut hit_b) = (F::zero(), F::zero(), F::zero());
        let (mut pmiss, mut pmiss_a, mut pmiss_b) = (F::zero(), F::zero(), F::zero());
        for &q in q_pos {
            let (z, sat) = self.logit(q);
            let c = sigmoid(z);
            hit = hit + softplus(-z);
            pmiss = pmiss + softplus(z);
            if !sat {
                hit_a = hit_a - (F::one() - c) * q;
                hit_b = hit_b - (F::one() - c);
                pmiss_a = pmiss_a + c * q;
                pmiss_b = pmiss_b + c;
            }
        }
        let (mut umiss, mut umiss_a, mut umiss_b) = (F::zero(), F::zero(), F::zero());
        for &q in q_unl {
            let (z, sat) = self.logit(q);
            let c = sigmoid(z);
            umiss = umiss + softplus(z);
            if !sat {
                umiss_a = umiss_a + c * q;
                umiss_b = umiss_b + c;
            }
        }
        let eta = self.eta_p;
        let (hit, hit_a, hit_b) = (hit / np, hit_a / np, hit_b / np);
        let (pmiss, pmiss_a, pmiss_b) = (pmiss / np, pmiss_a / np, pmiss_b / np);
        let (umiss, umiss_a, umiss_b) = (umiss / nu, umiss_a / nu, umiss_b / nu);

        let inner = umiss - eta * pmiss;
        let inner_a = umiss_a - eta * pmiss_a;
        let inner_b = umiss_b - eta * pmiss_b;
        let out = match self.variant {
            PuVariant::StandardNnpu => {
                if inner > F::zero() {
                    PuGradient { loss: eta * hit + inner, d_slope: eta * hit_a + inner_a, d_intercept: eta * hit_b + inner_b, clamped: false }
                } else {
                    PuGradient { loss: eta * hit, d_slope: eta * hit_a, d_intercept: eta * hit_b, clamped: true }
                }
            }
            PuVariant::PaperLiteral => {
                // loss = eta*hit - max(-inner, 0)
                if -inner > F::zero() {
                    PuGradient { loss: eta * hit + inner, d_slope: eta * hit_a + inner_a, d_intercept: eta * hit_b + inner_b, clamped: false }
                } else {
                    PuGradient { loss: eta * hit, d_slope: eta * hit_a, d_intercept: eta * hit_b, clamped: true }
                }
            }
        };
        Ok(out)
    }

    /// One gradient-descent step on the PU risk. Returns the pre-update risk.
    pub fn classifier_update(&mut self, q_pos: &[F], q_unl: &[F], lr: F) -> Result<F> {
        let g = self.gradient(q_pos, q_unl)?;
        self.slope = self.slope - lr * g.d_slope;
        self.intercept = self.intercept - lr * g.d_intercept;
        Ok(g.loss)
    }
}

/// `log(1 + e^x)` without overflow; equals `-log(1 - sigmoid(x))`.
#[inline]
fn softplus<F: Scalar>(x: F) -> F {
    if x > F::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
