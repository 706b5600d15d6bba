//! Trainer hyperparameters and their `key = value` text form.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::reach::PuVariant;
use crate::scalar::fmt_real;

/// How goals for the RL batch are chosen and weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampler {
    /// Uniform goals, reachability weights.
    #[default]
    Rws,
    /// Uniform goals, unit weights.
    Uniform,
    /// A fixed fraction of hindsight goals, the rest uniform; unit weights.
    HerRatio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightMode {
    /// Weights multiply the per-sample update.
    #[default]
    Multiplier,
    /// The batch is resampled proportionally to the weights, then unweighted.
    Resample,
}

macro_rules! text_enum {
    ($ty:ty { $($variant:path => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($variant => $name),+ }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(format!("unexpected `{other}`; expected one of: {}", [$($name),+].join(", "))),
                }
            }
        }
    };
}

text_enum!(Sampler { Sampler::Rws => "rws", Sampler::Uniform => "uniform", Sampler::HerRatio => "her_ratio" });
text_enum!(WeightMode { WeightMode::Multiplier => "multiplier", WeightMode::Resample => "resample" });

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub gamma: f64,
    pub delta: f64,
    pub eta_p: f64,
    pub batch_size: usize,
    pub lr_q: f64,
    pub lr_pi: f64,
    pub lr_c: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub seed: u64,
    pub pu_variant: PuVariant,
    pub weight_mode: WeightMode,
    /// Apply the weights to the critic update as well as the actor update.
    pub weight_critic: bool,
    pub sampler: Sampler,
    /// Fraction of hindsight goals in the `her_ratio` sampler.
    pub her_fraction: f64,
    /// RL iterations before the classifier starts updating.
    pub classifier_warmup_iters: usize,
    /// Classifier steps per RL step.
    pub classifier_steps: usize,
    /// 0 shares one batch-level denominator; `m > 0` draws `m` goals per entry.
    pub per_sample_denominator_m: usize,
    /// Evaluate success every this many iterations (0: final iteration only).
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub max_steps: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            gamma: 0.95,
            delta: 0.5,
            eta_p: 0.5,
            batch_size: 256,
            lr_q: 0.5,
            lr_pi: 0.1,
            lr_c: 0.01,
            alpha: 1.0,
            iterations: 20_000,
            seed: 0,
            pu_variant: PuVariant::StandardNnpu,
            weight_mode: WeightMode::Multiplier,
            weight_critic: true,
            sampler: Sampler::Rws,
            her_fraction: 0.5,
            classifier_warmup_iters: 0,
            classifier_steps: 1,
            per_sample_denominator_m: 0,
            eval_every: 0,
            eval_episodes: 100,
            max_steps: 100,
        }
    }
}

pub const KEYS: &[&str] = &[
    "gamma",
    "delta",
    "eta_p",
    "batch_size",
    "lr_q",
    "lr_pi",
    "lr_c",
    "alpha",
    "iterations",
    "seed",
    "pu_variant",
    "weight_mode",
    "weight_critic",
    "sampler",
    "her_fraction",
    "classifier_warmup_iters",
    "classifier_steps",
    "per_sample_denominator_m",
    "eval_every",
    "eval_episodes",
    "max_steps",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| Error::Config { key: key.to_string(), msg: e.to_string() })
}

impl TrainerConfig {
    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "gamma" => self.gamma = parse_value(key, v)?,
            "delta" => self.delta = parse_value(key, v)?,
            "eta_p" => self.eta_p = parse_value(key, v)?,
            "batch_size" => self.batch_size = parse_value(key, v)?,
            "lr_q" => self.lr_q = parse_value(key, v)?,
            "lr_pi" => self.lr_pi = parse_value(key, v)?,
            "lr_c" => self.lr_c = parse_value(key, v)?,
            "alpha" => self.alpha = parse_value(key, v)?,
            "iterations" => self.iterations = parse_value(key, v)?,
            "seed" => self.seed = parse_value(key, v)?,
            "pu_variant" => self.pu_variant = parse_value(key, v)?,
            "weight_mode" => self.weight_mode = parse_value(key, v)?,
            "weight_critic" => self.weight_critic = parse_value(key, v)?,
            "sampler" => self.sampler = parse_value(key, v)?,
            "her_fraction" => self.her_fraction = parse_value(key, v)?,
            "classifier_warmup_iters" => self.classifier_warmup_iters = parse_value(key, v)?,
            "classifier_steps" => self.classifier_steps = parse_value(key, v)?,
            "per_sample_denominator_m" => self.per_sample_denominator_m = parse_value(key, v)?,
            "eval_every" => self.eval_every = parse_value(key, v)?,
            "eval_episodes" => self.eval_episodes = parse_value(key, v)?,
            "max_steps" => self.max_steps = parse_value(key, v)?,
            other => return Err(Error::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::Config { key: key.into(), msg: msg.into() });
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma", "must lie in [0, 1)");
        }
        if self.delta.is_nan() || self.delta < 0.0 {
            return bad("delta", "must be non-negative");
        }
        if !(self.eta_p > 0.0 && self.eta_p < 1.0) {
            return bad("eta_p", "must lie in (0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive");
        }
        for (key, v) in [("lr_q", self.lr_q), ("lr_pi", self.lr_pi), ("lr_c", self.lr_c), ("alpha", self.alpha)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(key, "must be a positive real");
            }
        }
        if !(0.0..=1.0).contains(&self.her_fraction) {
            return bad("her_fraction", "must lie in [0, 1]");
        }
        if self.classifier_steps == 0 {
            return bad("classifier_steps", "must be positive");
        }
        if self.max_steps == 0 {
            return bad("max_steps", "must be positive");
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainerConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, format!("expected `key = value`, got `{line}`")))?;
            cfg.set(key.trim(), value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "gamma" => fmt_real(self.gamma),
            "delta" => fmt_real(self.delta),
            "eta_p" => fmt_real(self.eta_p),
            "batch_size" => self.batch_size.to_string(),
            "lr_q" => fmt_real(self.lr_q),
            "lr_pi" => fmt_real(self.lr_pi),
            "lr_c" => fmt_real(self.lr_c),
            "alpha" => fmt_real(self.alpha),
            "iterations" => self.iterations.to_string(),
            "seed" => self.seed.to_string(),
            "pu_variant" => self.pu_variant.to_string(),
            "weight_mode" => self.weight_mode.to_string(),
            "weight_critic" => self.weight_critic.to_string(),
            "sampler" => self.sampler.to_string(),
            "her_fraction" => fmt_real(self.her_fraction),
            "classifier_warmup_iters" => self.classifier_warmup_iters.to_string(),
            "classifier_steps" => self.classifier_steps.to_string(),
            "per_sample_denominator_m" => self.per_sample_denominator_m.to_string(),
            "eval_every" => self.eval_every.to_string(),
            "eval_episodes" => self.eval_episodes.to_string(),
            "max_steps" => self.max_steps.to_string(),
            _ => return None,
        })
    }

    /// Every field, one `key = value` per line, in [`KEYS`] order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).unwrap());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_all_keys() {
        let cfg = TrainerConfig {
            sampler: Sampler::HerRatio,
            pu_variant: PuVariant::PaperLiteral,
            weight_mode: WeightMode::Resample,
            gamma: 0.9,
            lr_c: 0.0125,
            ..TrainerConfig::default()
        };
        let back = TrainerConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        for key in KEYS {
            assert!(cfg.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn comments_and_errors() {
        let cfg = TrainerConfig::parse("# comment\nsampler = uniform # trailing\n\niterations=5\n").unwrap();
        assert_eq!(cfg.sampler, Sampler::Uniform);
        assert_eq!(cfg.iterations, 5);
        match TrainerConfig::parse("gama = 0.9\n") {
            Err(Error::UnknownKey(k)) => assert_eq!(k, "gama"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(TrainerConfig::parse("gamma = 1.0"), Err(Error::Config { .. })));
        assert!(matches!(TrainerConfig::parse("sampler = greedy"), Err(Error::Config { .. })));
        assert!(matches!(TrainerConfig::parse("just words"), Err(Error::Parse { line: 1, .. })));
    }
}
