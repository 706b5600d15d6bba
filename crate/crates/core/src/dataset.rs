//! Offline goal-conditioned trajectory corpora.
//!
//! A dataset owns its maze, the trajectories, a flat index over every
//! `(s_t, a_t)` pair and the goal pool `phi(s)` over every stored state.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::env::{is_terminal, phi, Action, Goal, Maze, State};
use crate::error::{Error, Result};

/// Goal threshold assumed when validating that expert data ends on its goal.
pub const DEFAULT_DELTA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Expert,
    Random,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Expert => "expert",
            Source::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub actions: Vec<Action>,
    pub goal: Goal,
    pub source: Source,
}

impl Trajectory {
    /// Number of transitions.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Checks `states[t+1] = step(states[t], actions[t])` and, for expert
    /// data, that the final state achieves the goal.
    pub fn validate(&self, maze: &Maze) -> Result<()> {
        if self.states.len() != self.actions.len() + 1 {
            return Err(Error::Validation(format!(
                "{} states for {} actions",
                self.states.len(),
                self.actions.len()
            )));
        }
        for s in &self.states {
            maze.check_state(*s)?;
        }
        maze.check_goal(self.goal)?;
        for (t, a) in self.actions.iter().enumerate() {
            let next = maze.step_unchecked(self.states[t], *a);
            if next != self.states[t + 1] {
                return Err(Error::Validation(format!(
                    "step {t}: {} --{a:?}--> {} but dynamics give {next}",
                    self.states[t],
                    self.states[t + 1]
                )));
            }
        }
        if self.source == Source::Expert {
            let last = *self.states.last().unwrap();
            if !is_terminal(last, self.goal, DEFAULT_DELTA) {
                return Err(Error::Validation(format!(
                    "expert trajectory ends at {last}, not at goal {}",
                    self.goal
                )));
            }
        }
        Ok(())
    }
}

/// One sampled `(s, a, s')` tuple with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub state: State,
    pub action: Action,
    pub next: State,
    pub traj: usize,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDataset {
    maze: Maze,
    trajectories: Vec<Trajectory>,
    flat_index: Vec<(usize, usize)>,
    goal_pool: Vec<Goal>,
}

impl OfflineDataset {
    pub fn new(maze: Maze, trajectories: Vec<Trajectory>) -> Result<Self> {
        for (i, t) in trajectories.iter().enumerate() {
            t.validate(&maze)
                .map_err(|e| Error::Validation(format!("trajectory {i}: {e}")))?;
        }
        let flat_index = trajectories
            .iter()
            .enumerate()
            .flat_map(|(i, t)| (0..t.len()).map(move |s| (i, s)))
            .collect();
        let goal_pool = trajectories
            .iter()
            .flat_map(|t| t.states.iter().map(|s| phi(*s)))
            .collect();
        Ok(OfflineDataset { maze, trajectories, flat_index, goal_pool })
    }

    pub fn maze(&self) -> &Maze {
        &self.maze
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn flat_index(&self) -> &[(usize, usize)] {
        &self.flat_index
    }

    pub fn goal_pool(&self) -> &[Goal] {
        &self.goal_pool
    }

    pub fn n_transitions(&self) -> usize {
        self.flat_index.len()
    }

    pub fn transition(&self, traj: usize, step: usize) -> Transition {
        let t = &self.trajectories[traj];
        Transition {
            state: t.states[step],
            action: t.actions[step],
            next: t.states[step + 1],
            traj,
            step,
        }
    }

    /// `n` uniform draws with replacement from the flat transition index.
    pub fn sample_transitions<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Transition>> {
        if self.flat_index.is_empty() {
            return Err(Error::Empty("transition index"));
        }
        Ok((0..n)
            .map(|_| {
                let (traj, step) = self.flat_index[rng.gen_range(0..self.flat_index.len())];
                self.transition(traj, step)
            })
            .collect())
    }

    /// `n` uniform draws with replacement from the goal pool.
    pub fn sample_goals_uniform<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Goal>> {
        if self.goal_pool.is_empty() {
            return Err(Error::Empty("goal pool"));
        }
        Ok((0..n)
            .map(|_| self.goal_pool[rng.gen_range(0..self.goal_pool.len())])
            .collect())
    }

    pub fn count(&self, source: Source) -> usize {
        self.trajectories.iter().filter(|t| t.source == source).count()
    }

    /// Fraction of free maze cells visited by at least one trajectory.
    pub fn state_coverage(&self) -> f64 {
        let visited: HashSet<State> = self.trajectories.iter().flat_map(|t| t.states.iter().copied()).collect();
        visited.len() as f64 / self.maze.n_free() as f64
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("#maze {} {} {}\n", self.maze.hash(), self.maze.width(), self.maze.height());
        for row in self.maze.rows() {
            let _ = writeln!(out, "#| {row}");
        }
        for t in &self.trajectories {
            let _ = write!(out, "{};{},{}", t.source.as_str(), t.goal.x, t.goal.y);
            for (i, s) in t.states.iter().enumerate() {
                if i > 0 {
                    let _ = write!(out, ";{}", t.actions[i - 1].index());
                }
                let _ = write!(out, ";{},{}", s.x, s.y);
            }
            out.push('\n');
        }
        let _ = writeln!(out, "#end {}", self.trajectories.len());
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        let header = lines.first().ok_or_else(|| Error::parse(1, "empty file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "#maze" {
            return Err(Error::parse(1, "expected `#maze <hash> <width> <height>`"));
        }
        let width: usize = fields[2].parse().map_err(|_| Error::parse(1, "bad width"))?;
        let height: usize = fields[3].parse().map_err(|_| Error::parse(1, "bad height"))?;

        let mut maze_text = format!("{width} {height}\n");
        for y in 0..height {
            let line = lines.get(1 + y).ok_or_else(|| Error::parse(2 + y, "missing maze row"))?;
            let row = line
                .strip_prefix("#| ")
                .ok_or_else(|| Error::parse(2 + y, "expected `#| <maze row>`"))?;
            maze_text.push_str(row);
            maze_text.push('\n');
        }
        let maze = Maze::parse(&maze_text).map_err(|e| Error::parse(2, format!("embedded maze: {e}")))?;
        if maze.hash() != fields[1] {
            return Err(Error::parse(1, "maze hash does not match embedded maze"));
        }

        let mut trajectories = Vec::new();
        let mut declared = None;
        for (i, line) in lines.iter().enumerate().skip(1 + height) {
            let lno = i + 1;
            if declared.is_some() {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(Error::parse(lno, "content after `#end`"));
            }
            if let Some(n) = line.strip_prefix("#end ") {
                declared = Some(n.trim().parse::<usize>().map_err(|_| Error::parse(lno, "bad #end count"))?);
                continue;
            }
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            trajectories.push(parse_trajectory(line, lno)?);
        }
        match declared {
            None => return Err(Error::parse(lines.len(), "missing `#end` trailer (truncated file?)")),
            Some(n) if n != trajectories.len() => {
                return Err(Error::parse(
                    lines.len(),
                    format!("trailer declares {n} trajectories, found {}", trajectories.len()),
                ))
            }
            _ => {}
        }
        OfflineDataset::new(maze, trajectories)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

fn parse_cell(tok: &str, lno: usize) -> Result<(usize, usize)> {
    let (x, y) = tok
        .split_once(',')
        .ok_or_else(|| Error::parse(lno, format!("expected `x,y`, got `{tok}`")))?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|_| Error::parse(lno, format!("bad coordinate `{v}`")));
    Ok((p(x)?, p(y)?))
}

fn parse_trajectory(line: &str, lno: usize) -> Result<Trajectory> {
    let toks: Vec<&str> = line.trim().split(';').collect();
    if toks.len() < 3 || toks.len().is_multiple_of(2) {
        return Err(Error::parse(lno, "expected `source;gx,gy;x0,y0;a0;...;xL,yL`"));
    }
    let source = match toks[0] {
        "expert" => Source::Expert,
        "random" => Source::Random,
        other => return Err(Error::parse(lno, format!("unknown source `{other}`"))),
    };
    let (gx, gy) = parse_cell(toks[1], lno)?;
    let mut states = Vec::new();
    let mut actions = Vec::new();
    for (k, tok) in toks[2..].iter().enumerate() {
        if k % 2 == 0 {
            let (x, y) = parse_cell(tok, lno)?;
            states.push(State::new(x, y));
        } else {
            let a = tok
                .parse::<usize>()
                .ok()
                .and_then(Action::from_index)
                .ok_or_else(|| Error::parse(lno, format!("bad action `{tok}`")))?;
            actions.push(a);
        }
    }
    Ok(Trajectory { states, actions, goal: Goal::new(gx, gy), source })
}

/// Shortest path from `start` to `goal`; among equally short successors the
/// first action in `Up, Down, Left, Right` order wins.
pub fn generate_expert(maze: &Maze, start: State, goal: Goal) -> Result<Trajectory> {
    maze.check_state(start)?;
    maze.check_goal(goal)?;
    let target = State::new(goal.x, goal.y);
    let dist = maze.distances_to(target);
    let unreachable = || Error::Unreachable { sx: start.x, sy: start.y, gx: goal.x, gy: goal.y };
    let mut d = dist[maze.index(start.x, start.y)].ok_or_else(unreachable)?;
    let mut states = vec![start];
    let mut actions = Vec::with_capacity(d);
    let mut s = start;
    while d > 0 {
        let (a, next) = Action::ALL
            .iter()
            .map(|&a| (a, maze.step_unchecked(s, a)))
            .find(|(_, n)| dist[maze.index(n.x, n.y)] == Some(d - 1))
            .expect("BFS distances have a decreasing neighbour");
        actions.push(a);
        states.push(next);
        s = next;
        d -= 1;
    }
    Ok(Trajectory { states, actions, goal, source: Source::Expert })
}

/// Uniform random walk of `length` steps; the goal is `phi` of a uniformly
/// chosen visited state.
pub fn generate_random<R: Rng + ?Sized>(maze: &Maze, start: State, length: usize, rng: &mut R) -> Result<Trajectory> {
    maze.check_state(start)?;
    if length == 0 {
        return Err(Error::Validation("random trajectory length must be positive".into()));
    }
    let mut states = vec![start];
    let mut actions = Vec::with_capacity(length);
    let mut s = start;
    for _ in 0..length {
        let a = Action::ALL[rng.gen_range(0..Action::COUNT)];
        s = maze.step_unchecked(s, a);
        actions.push(a);
        states.push(s);
    }
    let goal = phi(states[rng.gen_range(0..states.len())]);
    Ok(Trajectory { states, actions, goal, source: Source::Random })
}

#[derive(Debug, Clone, Copy)]
pub struct MixtureOptions {
    pub random_length: usize,
}

impl Default for MixtureOptions {
    fn default() -> Self {
        MixtureOptions { random_length: 30 }
    }
}

/// `round(expert_ratio * n_traj)` shortest-path trajectories between random
/// (start cell, reachable goal) pairs, the remainder random walks from start
/// cells.
pub fn build_mixture<R: Rng + ?Sized>(
    maze: &Maze,
    expert_ratio: f64,
    n_traj: usize,
    opts: MixtureOptions,
    rng: &mut R,
) -> Result<OfflineDataset> {
    if !(0.0..=1.0).contains(&expert_ratio) {
        return Err(Error::Validation(format!("expert ratio {expert_ratio} outside [0, 1]")));
    }
    if n_traj == 0 {
        return Err(Error::Validation("dataset must contain at least one trajectory".into()));
    }
    let n_expert = (expert_ratio * n_traj as f64).round() as usize;
    let starts = maze.start_cells();
    let mut trajectories = Vec::with_capacity(n_traj);
    for _ in 0..n_expert {
        let start = starts[rng.gen_range(0..starts.len())];
        let dist = maze.distances_to(start);
        let goals: Vec<State> = maze
            .free_states()
            .filter(|s| *s != start && dist[maze.index(s.x, s.y)].is_some())
            .collect();
        if goals.is_empty() {
            return Err(Error::Validation(format!("no goal reachable from start {start}")));
        }
        let goal = phi(goals[rng.gen_range(0..goals.len())]);
        trajectories.push(generate_expert(maze, start, goal)?);
    }
    for _ in n_expert..n_traj {
        let start = starts[rng.gen_range(0..starts.len())];
        trajectories.push(generate_random(maze, start, opts.random_length, rng)?);
    }
    OfflineDataset::new(maze.clone(), trajectories)
}

/// Hand-built corpora used by tests, the acceptance suite and the CLI.
pub mod fixtures {
    use super::*;

    /// 15x15 maze with a few wall blocks away from the demonstrations.
    pub const STITCHING_MAZE: &str = include_str!("../../../mazes/stitching15.txt");

    /// Three demonstrations: a horizontal one (`(0,7)` to `(14,7)`) and a
    /// vertical one (`(7,0)` to `(7,14)`) that cross at `(7,7)`, plus a short
    /// disjoint one in the corner. Crossing goals are only reachable by
    /// composing the first two.
    pub fn stitching() -> OfflineDataset {
        let maze = Maze::parse(STITCHING_MAZE).expect("fixture maze parses");
        let legs = [
            (State::new(0, 7), Goal::new(14, 7)),
            (State::new(7, 0), Goal::new(7, 14)),
            (State::new(0, 0), Goal::new(4, 3)),
        ];
        let trajectories = legs
            .iter()
            .map(|(s, g)| generate_expert(&maze, *s, *g).expect("fixture goals reachable"))
            .collect();
        OfflineDataset::new(maze, trajectories).expect("fixture is consistent")
    }

    /// Starting cell of the horizontal demonstration.
    pub const STITCHING_PROBE: State = State::new(0, 7);
}
