//! Versioned text checkpoint holding the critic, actor and classifier.
//!
//! ```text
//! RWSQ1
//! gamma <f>
//! delta <f>
//! maze <sha256> <width> <height>
//! classifier <slope> <intercept> <eta_p> <variant>
//! iteration <n>
//! q <n_values>
//! <4 values per (state, goal) row> ...
//! policy <n_values>
//! <4 logits per (state, goal) row> ...
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::env::Maze;
use crate::error::{Error, Result};
use crate::reach::{PuVariant, ReachabilityClassifier};
use crate::scalar::{fmt_real, Scalar};
use crate::trainer::RunState;
use crate::value::{GoalConditionedQ, PolicyTable, TableShape};

pub const MAGIC: &str = "RWSQ1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<F> {
    pub run: RunState<F>,
    pub delta: F,
    pub maze_hash: String,
}

impl<F: Scalar> Checkpoint<F> {
    pub fn new(run: RunState<F>, delta: F, maze: &Maze) -> Self {
        Checkpoint { run, delta, maze_hash: maze.hash() }
    }

    /// Fails unless the checkpoint was trained on `maze`.
    pub fn check_maze(&self, maze: &Maze) -> Result<()> {
        let shape = self.run.q.shape();
        if shape != TableShape::of(maze) || self.maze_hash != maze.hash() {
            return Err(Error::Mismatch(format!(
                "checkpoint was trained on a different {}x{} maze (hash {})",
                shape.width, shape.height, self.maze_hash
            )));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let run = &self.run;
        let shape = run.q.shape();
        let c = &run.classifier;
        let mut out = String::with_capacity(shape.len() * 24);
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "gamma {}", fmt_real(run.q.gamma()));
        let _ = writeln!(out, "delta {}", fmt_real(self.delta));
        let _ = writeln!(out, "maze {} {} {}", self.maze_hash, shape.width, shape.height);
        let _ = writeln!(out, "classifier {} {} {} {}", fmt_real(c.slope), fmt_real(c.intercept), fmt_real(c.eta_p), c.variant);
        let _ = writeln!(out, "iteration {}", run.iteration);
        for (name, values) in [("q", run.q.raw()), ("policy", run.policy.raw())] {
            let _ = writeln!(out, "{name} {}", values.len());
            for row in values.chunks(4) {
                let _ = writeln!(out, "{} {} {} {}", fmt_real(row[0]), fmt_real(row[1]), fmt_real(row[2]), fmt_real(row[3]));
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| lines.next().ok_or_else(|| Error::parse(0, format!("unexpected end of file, expected {what}")));

        let (lno, magic) = next("magic")?;
        if magic.trim() != MAGIC {
            return Err(Error::parse(lno, format!("bad magic `{magic}`, expected {MAGIC}")));
        }
        let field = |line: (usize, &str), key: &str, n: usize| -> Result<(usize, Vec<String>)> {
            let toks: Vec<String> = line.1.split_whitespace().map(str::to_string).collect();
            if toks.first().map(String::as_str) != Some(key) || toks.len() != n + 1 {
                return Err(Error::parse(line.0, format!("expected `{key}` with {n} values")));
            }
            Ok((line.0, toks[1..].to_vec()))
        };
        fn num<T: FromStr>(lno: usize, s: &str) -> Result<T> {
            s.parse().map_err(|_| Error::parse(lno, format!("bad number `{s}`")))
        }

        let (l, v) = field(next("gamma")?, "gamma", 1)?;
        let gamma: F = num(l, &v[0])?;
        let (l, v) = field(next("delta")?, "delta", 1)?;
        let delta: F = num(l, &v[0])?;
        let (l, v) = field(next("maze")?, "maze", 3)?;
        let maze_hash = v[0].clone();
        let shape = TableShape { width: num(l, &v[1])?, height: num(l, &v[2])? };
        let (l, v) = field(next("classifier")?, "classifier", 4)?;
        let variant: PuVariant = v[3].parse().map_err(|e: String| Error::parse(l, e))?;
        let mut classifier = ReachabilityClassifier::new(num(l, &v[2])?, variant)?;
        classifier.slope = num(l, &v[0])?;
        classifier.intercept = num(l, &v[1])?;
        let (l, v) = field(next("iteration")?, "iteration", 1)?;
        let iteration: usize = num(l, &v[0])?;

        let mut tables = Vec::new();
        for name in ["q", "policy"] {
            let (l, v) = field(next(name)?, name, 1)?;
            let n: usize = num(l, &v[0])?;
            if n != shape.len() {
                return Err(Error::parse(l, format!("{name} has {n} values, maze needs {}", shape.len())));
            }
            let mut values = Vec::with_capacity(n);
            for _ in 0..n / 4 {
                let (l, row) = next(name)?;
                let toks: Vec<&str> = row.split_whitespace().collect();
                if toks.len() != 4 {
                    return Err(Error::parse(l, "expected 4 values"));
                }
                for t in toks {
                    values.push(num::<F>(l, t)?);
                }
            }
            tables.push(values);
        }
        let logits = tables.pop().unwrap();
        let q = tables.pop().unwrap();
        let run = RunState {
            q: GoalConditionedQ::from_raw(shape, gamma, q)?,
            policy: PolicyTable::from_raw(shape, logits)?,
            classifier,
            iteration,
            metrics: Vec::new(),
        };
        Ok(Checkpoint { run, delta, maze_hash })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TrainerConfig;
    use crate::dataset::fixtures;
    use crate::trainer::train;

    #[test]
    fn round_trip_is_bit_exact() {
        let d = fixtures::stitching();
        let cfg = TrainerConfig { iterations: 30, batch_size: 32, ..TrainerConfig::default() };
        let run: RunState<f64> = train(&d, &cfg).unwrap();
        let ck = Checkpoint::new(run.clone(), 0.5, d.maze());
        let back = Checkpoint::<f64>::parse(&ck.to_text()).unwrap();
        assert_eq!(back.run.q, run.q);
        assert_eq!(back.run.policy, run.policy);
        assert_eq!(back.run.classifier, run.classifier);
        assert_eq!(back.run.iteration, 30);
        back.check_maze(d.maze()).unwrap();
        let other = crate::env::Maze::open(15, 15, vec![crate::env::State::new(0, 0)]).unwrap();
        assert!(matches!(back.check_maze(&other), Err(Error::Mismatch(_))));
    }

    #[test]
    fn rejects_bad_files() {
        assert!(Checkpoint::<f64>::parse("RWSQ0\n").is_err());
        let d = fixtures::stitching();
        let run: RunState<f64> = RunState::new(&d, &TrainerConfig::default()).unwrap();
        let text = Checkpoint::new(run, 0.5, d.maze()).to_text();
        let cut: String = text.lines().take(50).collect::<Vec<_>>().join("\n");
        assert!(matches!(Checkpoint::<f64>::parse(&cut), Err(Error::Parse { .. })));
    }
}
