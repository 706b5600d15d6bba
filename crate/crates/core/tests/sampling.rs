//! Empirical frequencies of dataset sampling against their exact laws.

use rand::SeedableRng;
use rws_core::dataset::{generate_expert, generate_random};
use rws_core::env::phi;
use rws_core::trainer::SeededRng;
use rws_core::*;

const DRAWS: usize = 100_000;

/// Asserts every count lies within 3 binomial standard deviations (plus one
/// count of slack) of its expectation.
fn within_three_sigma(counts: &[usize], probs: &[f64]) {
    for (i, (&c, &p)) in counts.iter().zip(probs).enumerate() {
        let mean = DRAWS as f64 * p;
        let sd = (DRAWS as f64 * p * (1.0 - p)).sqrt();
        assert!((c as f64 - mean).abs() <= 3.0 * sd + 1.0, "bin {i}: {c} vs {mean:.1} (sd {sd:.1})");
    }
}

fn dataset() -> OfflineDataset {
    let maze = Maze::parse("5 3\nS....\n.#.#.\n.....\n").unwrap();
    let mut rng = SeededRng::seed_from_u64(4);
    let trajs = vec![
        generate_expert(&maze, State::new(0, 0), Goal::new(4, 2)).unwrap(),
        generate_random(&maze, State::new(0, 0), 3, &mut rng).unwrap(),
        generate_random(&maze, State::new(4, 0), 9, &mut rng).unwrap(),
    ];
    OfflineDataset::new(maze, trajs).unwrap()
}

#[test]
fn transitions_are_uniform_over_the_flat_index() {
    let d = dataset();
    let n = d.n_transitions();
    let mut counts = vec![0usize; n];
    let mut rng = SeededRng::seed_from_u64(11);
    for t in d.sample_transitions(DRAWS, &mut rng).unwrap() {
        let k = d.flat_index().iter().position(|&(i, j)| (i, j) == (t.traj, t.step)).unwrap();
        counts[k] += 1;
    }
    within_three_sigma(&counts, &vec![1.0 / n as f64; n]);
}

#[test]
fn uniform_goals_follow_pool_multiplicity() {
    let d = dataset();
    let pool = d.goal_pool();
    // Each goal's probability is its share of the pool, duplicates included.
    let mut distinct: Vec<Goal> = pool.to_vec();
    distinct.sort();
    distinct.dedup();
    let probs: Vec<f64> = distinct.iter().map(|g| pool.iter().filter(|p| *p == g).count() as f64 / pool.len() as f64).collect();
    let mut counts = vec![0usize; distinct.len()];
    let mut rng = SeededRng::seed_from_u64(12);
    for g in d.sample_goals_uniform(DRAWS, &mut rng).unwrap() {
        counts[distinct.binary_search(&g).unwrap()] += 1;
    }
    within_three_sigma(&counts, &probs);
    assert!(distinct.iter().all(|g| d.trajectories().iter().any(|t| t.states.iter().any(|s| phi(*s) == *g))));
}
