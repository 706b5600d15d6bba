//! Greedy rollouts, success metrics, the dataset reachability oracle, weight
//! heatmaps and multi-seed sampler comparisons.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::config::TrainerConfig;
use crate::dataset::OfflineDataset;
use crate::env::{is_terminal, phi, Goal, Maze, State};
use crate::error::{Error, Result};
use crate::scalar::{fmt_real, Scalar};
use crate::trainer::{train, RunState, SeededRng};
use crate::value::PolicyTable;
use crate::weight::sampling_weights;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rollout {
    pub success: bool,
    pub steps: usize,
}

/// Executes the greedy policy from `start` until the goal is achieved or
/// `max_steps` actions have been taken.
pub fn rollout<F: Scalar>(policy: &PolicyTable<F>, maze: &Maze, start: State, goal: Goal, delta: F, max_steps: usize) -> Result<Rollout> {
    maze.check_state(start)?;
    let mut s = start;
    for t in 0..=max_steps {
        if is_terminal(s, goal, delta) {
            return Ok(Rollout { success: true, steps: t });
        }
        if t == max_steps {
            break;
        }
        s = maze.step_unchecked(s, policy.policy_action(s, goal));
    }
    Ok(Rollout { success: false, steps: max_steps })
}

pub fn success_rate<F: Scalar>(policy: &PolicyTable<F>, maze: &Maze, pairs: &[(State, Goal)], delta: F, max_steps: usize) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("evaluation pairs"));
    }
    let mut hits = 0usize;
    for (s, g) in pairs {
        if rollout(policy, maze, *s, *g, delta, max_steps)?.success {
            hits += 1;
        }
    }
    Ok(hits as f64 / pairs.len() as f64)
}

/// Goals reachable from `start` along the directed graph of transitions
/// present in the dataset (always including `phi(start)`).
pub fn reachability_oracle(dataset: &OfflineDataset, start: State) -> BTreeSet<Goal> {
    let mut edges: HashMap<State, Vec<State>> = HashMap::new();
    for t in dataset.trajectories() {
        for w in t.states.windows(2) {
            edges.entry(w[0]).or_default().push(w[1]);
        }
    }
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        for n in edges.get(&s).into_iter().flatten() {
            if seen.insert(*n) {
                queue.push_back(*n);
            }
        }
    }
    seen.into_iter().map(phi).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairsMode {
    /// Start on one trajectory, goal on a different one.
    Stitching,
    /// Start `s_i` and goal `phi(s_h)`, `h > i`, on the same trajectory.
    InTrajectory,
    /// Start from the maze's start cells, goal uniform over maze-reachable
    /// free cells; independent of the dataset contents.
    Maze,
}

impl FromStr for PairsMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "stitching" => Ok(PairsMode::Stitching),
            "in_trajectory" => Ok(PairsMode::InTrajectory),
            "maze" => Ok(PairsMode::Maze),
            other => Err(format!("expected stitching, in_trajectory or maze, got `{other}`")),
        }
    }
}

/// Draws `n` evaluation `(start, goal)` pairs.
pub fn eval_pairs<R: Rng + ?Sized>(dataset: &OfflineDataset, mode: PairsMode, n: usize, rng: &mut R) -> Result<Vec<(State, Goal)>> {
    let trajs = dataset.trajectories();
    match mode {
        PairsMode::InTrajectory => {
            let usable: Vec<usize> = (0..trajs.len()).filter(|i| !trajs[*i].is_empty()).collect();
            if usable.is_empty() {
                return Err(Error::Empty("trajectories with transitions"));
            }
            Ok((0..n)
                .map(|_| {
                    let t = &trajs[usable[rng.gen_range(0..usable.len())]];
                    let i = rng.gen_range(0..t.len());
                    let h = rng.gen_range(i + 1..=t.len());
                    (t.states[i], phi(t.states[h]))
                })
                .collect())
        }
        PairsMode::Stitching => {
            if trajs.len() < 2 {
                return Err(Error::Validation("stitching pairs need at least two trajectories".into()));
            }
            Ok((0..n)
                .map(|_| {
                    let i = rng.gen_range(0..trajs.len());
                    let mut j = rng.gen_range(0..trajs.len() - 1);
                    if j >= i {
                        j += 1;
                    }
                    let (a, b) = (&trajs[i], &trajs[j]);
                    let s = a.states[rng.gen_range(0..a.states.len())];
                    let g = phi(b.states[rng.gen_range(0..b.states.len())]);
                    (s, g)
                })
                .collect())
        }
        PairsMode::Maze => {
            let maze = dataset.maze();
            let starts = maze.start_cells();
            let targets: Vec<Vec<State>> = starts
                .iter()
                .map(|s| {
                    let dist = maze.distances_to(*s);
                    maze.free_states().filter(|c| c != s && dist[maze.index(c.x, c.y)].is_some()).collect()
                })
                .collect();
            if targets.iter().all(|t| t.is_empty()) {
                return Err(Error::Empty("maze-reachable goals"));
            }
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let k = rng.gen_range(0..starts.len());
                if targets[k].is_empty() {
                    continue;
                }
                out.push((starts[k], phi(targets[k][rng.gen_range(0..targets[k].len())])));
            }
            Ok(out)
        }
    }
}

/// Keeps the pairs whose goal the oracle certifies reachable from the start.
pub fn feasible_pairs(dataset: &OfflineDataset, pairs: &[(State, Goal)]) -> Vec<(State, Goal)> {
    let mut cache: HashMap<State, BTreeSet<Goal>> = HashMap::new();
    pairs
        .iter()
        .filter(|(s, g)| cache.entry(*s).or_insert_with(|| reachability_oracle(dataset, *s)).contains(g))
        .copied()
        .collect()
}

/// Which action the heatmap evaluates per goal cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeatmapAction {
    /// The greedy policy action at `(state, goal)`.
    #[default]
    Greedy,
    /// Mean classifier score over all four actions.
    Average,
}

/// Row-major grid of weights; `NaN` marks walls.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// One line per maze row (`y = 0` first), space separated.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in self.values.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|v| fmt_real(*v)).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    /// Plain PGM (`P2`), `scale` pixels per cell. Darker means a larger
    /// weight; walls are white.
    pub fn to_pgm(&self, scale: usize) -> String {
        let scale = scale.max(1);
        let finite = self.values.iter().copied().filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let shade = |v: f64| -> u32 {
            if !v.is_finite() {
                return 255;
            }
            let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            (223.0 * (1.0 - t)).round() as u32
        };
        let mut out = format!("P2\n{} {}\n255\n", self.width * scale, self.height * scale);
        for row in self.values.chunks(self.width) {
            let pixels: Vec<String> = row.iter().flat_map(|v| std::iter::repeat_n(shade(*v).to_string(), scale)).collect();
            let line = pixels.join(" ");
            for _ in 0..scale {
                let _ = writeln!(out, "{line}");
            }
        }
        out
    }
}

/// Reachability weights from a fixed state to every free goal cell,
/// normalised jointly over all free cells.
pub fn weight_heatmap<F: Scalar>(state: State, run: &RunState<F>, maze: &Maze, action: HeatmapAction) -> Result<Heatmap> {
    maze.check_state(state)?;
    let cells: Vec<State> = maze.free_states().collect();
    let mut scores = Vec::with_capacity(cells.len());
    for c in &cells {
        let g = phi(*c);
        let score = match action {
            HeatmapAction::Greedy => {
                let a = run.policy.policy_action(state, g);
                run.classifier.score(run.q.q_eval(state, g, a)?)?
            }
            HeatmapAction::Average => {
                let qs = run.q.values(state, g);
                let mut sum = F::zero();
                for q in qs {
                    sum = sum + run.classifier.score(q)?;
                }
                sum / F::of(qs.len() as f64)
            }
        };
        scores.push(score);
    }
    let weights = sampling_weights(&scores)?;
    let mut values = vec![f64::NAN; maze.n_cells()];
    for (c, w) in cells.iter().zip(weights) {
        values[maze.index(c.x, c.y)] = w.as_f64();
    }
    Ok(Heatmap { width: maze.width(), height: maze.height(), values })
}

/// Mean weight over oracle-reachable free cells and over the remaining free cells.
pub fn heatmap_partition_means(heatmap: &Heatmap, reachable: &BTreeSet<Goal>) -> (f64, f64) {
    let (mut rs, mut rn, mut us, mut un) = (0.0, 0usize, 0.0, 0usize);
    for y in 0..heatmap.height {
        for x in 0..heatmap.width {
            let v = heatmap.get(x, y);
            if v.is_nan() {
                continue;
            }
            if reachable.contains(&Goal::new(x, y)) {
                rs += v;
                rn += 1;
            } else {
                us += v;
                un += 1;
            }
        }
    }
    (rs / rn as f64, us / un as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRow {
    pub label: String,
    pub seed: u64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub label: String,
    pub mean: f64,
    pub stderr: f64,
    pub n_seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub per_seed: Vec<SeedRow>,
    pub aggregate: Vec<AggregateRow>,
}

impl CompareReport {
    pub fn per_seed_csv(&self) -> String {
        let mut out = String::from("sampler,seed,success_rate\n");
        for r in &self.per_seed {
            let _ = writeln!(out, "{},{},{}", r.label, r.seed, fmt_real(r.success_rate));
        }
        out
    }

    pub fn aggregate_csv(&self) -> String {
        let mut out = String::from("sampler,mean,stderr,n_seeds\n");
        for r in &self.aggregate {
            let _ = writeln!(out, "{},{},{},{}", r.label, fmt_real(r.mean), fmt_real(r.stderr), r.n_seeds);
        }
        out
    }

    pub fn mean_of(&self, label: &str) -> Option<f64> {
        self.aggregate.iter().find(|r| r.label == label).map(|r| r.mean)
    }
}

/// Mean and standard error of the mean (sample standard deviation).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Report labels: the sampler name, suffixed with the config position when
/// two configs share a sampler.
pub fn config_labels(configs: &[TrainerConfig]) -> Vec<String> {
    configs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let name = c.sampler.as_str();
            if configs.iter().filter(|o| o.sampler == c.sampler).count() > 1 {
                format!("{name}#{}", i + 1)
            } else {
                name.to_string()
            }
        })
        .collect()
}

/// Trains every config with seeds `config.seed + i`, `i < n_seeds`, and
/// scores each run on `pairs`. `threads = 0` runs serially. Results do not
/// depend on the thread count.
pub fn compare(
    dataset: &OfflineDataset,
    configs: &[TrainerConfig],
    n_seeds: usize,
    pairs: &[(State, Goal)],
    threads: usize,
) -> Result<CompareReport> {
    if configs.len() < 2 {
        return Err(Error::Validation("compare needs at least two configs".into()));
    }
    if n_seeds == 0 {
        return Err(Error::Validation("compare needs at least one seed".into()));
    }
    if pairs.is_empty() {
        return Err(Error::Empty("evaluation pairs"));
    }
    let labels = config_labels(configs);
    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|c| (0..n_seeds as u64).map(move |i| (c, i)))
        .collect();
    let run = |&(c, i): &(usize, u64)| -> Result<SeedRow> {
        let cfg = TrainerConfig { seed: configs[c].seed.wrapping_add(i), ..configs[c].clone() };
        let state: RunState<f64> = train(dataset, &cfg)?;
        let rate = success_rate(&state.policy, dataset.maze(), pairs, cfg.delta, cfg.max_steps)?;
        Ok(SeedRow { label: labels[c].clone(), seed: cfg.seed, success_rate: rate })
    };
    let per_seed: Vec<SeedRow> = if threads == 0 {
        jobs.iter().map(run).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(run).collect::<Result<_>>())?
    };
    let aggregate = labels
        .iter()
        .map(|label| {
            let xs: Vec<f64> = per_seed.iter().filter(|r| &r.label == label).map(|r| r.success_rate).collect();
            let (mean, stderr) = mean_stderr(&xs);
            AggregateRow { label: label.clone(), mean, stderr, n_seeds: xs.len() }
        })
        .collect();
    Ok(CompareReport { per_seed, aggregate })
}

/// Evaluation pairs from a dedicated seed, so every compared run sees the same set.
pub fn held_out_pairs(dataset: &OfflineDataset, mode: PairsMode, n: usize, seed: u64, feasible_only: bool) -> Result<Vec<(State, Goal)>> {
    let mut rng = SeededRng::seed_from_u64(seed);
    let pairs = eval_pairs(dataset, mode, n, &mut rng)?;
    let pairs = if feasible_only { feasible_pairs(dataset, &pairs) } else { pairs };
    if pairs.is_empty() {
        return Err(Error::Empty("feasible evaluation pairs"));
    }
    Ok(pairs)
}
