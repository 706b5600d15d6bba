//! `rws`: dataset generation, training, evaluation, heatmaps and sampler
//! comparisons for reachability-weighted offline goal-conditioned RL.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rws_core::dataset::{build_mixture, fixtures, MixtureOptions};
use rws_core::eval::{self, HeatmapAction, PairsMode};
use rws_core::trainer::{self, SeededRng};
use rws_core::{Checkpoint, OfflineDataset, Maze, Run, Source, TrainerConfig};

#[derive(Parser)]
#[command(name = "rws", version, about = "Reachability-weighted sampling for offline goal-conditioned RL on gridworlds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an expert/random trajectory mixture.
    GenData(GenData),
    /// Train a critic, actor and classifier; writes checkpoint, metrics and config.
    Train(Train),
    /// Roll out a checkpoint's greedy policy on evaluation pairs.
    Eval(Eval),
    /// Export the reachability-weight map from one state.
    Heatmap(Heatmap),
    /// Train several configs over several seeds and aggregate success rates.
    Compare(Compare),
}

#[derive(Args)]
struct GenData {
    /// Maze file. Required unless --fixture is given.
    #[arg(long, required_unless_present = "fixture")]
    maze: Option<PathBuf>,
    /// Built-in dataset instead of a generated mixture (`stitching`).
    #[arg(long, conflicts_with_all = ["maze", "expert_ratio", "n_traj"])]
    fixture: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    expert_ratio: f64,
    #[arg(long, default_value_t = 100)]
    n_traj: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Length of each random-walk trajectory.
    #[arg(long, default_value_t = MixtureOptions::default().random_length)]
    random_length: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Train {
    /// `key = value` config file; defaults are used for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: PathBuf,
    /// Output directory for checkpoint.rwsq, metrics.csv and config.txt.
    #[arg(long)]
    out: PathBuf,
    /// Config overrides as `--key value` pairs, e.g. `--sampler uniform --lr_q 0.3`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct Eval {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// stitching, in_trajectory or maze.
    #[arg(long, default_value = "in_trajectory")]
    pairs: PairsMode,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    max_steps: usize,
    /// Drop pairs the dataset reachability oracle does not certify.
    #[arg(long)]
    feasible_only: bool,
    /// Per-pair CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Heatmap {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    x: usize,
    #[arg(long)]
    y: usize,
    /// Text grid; the graymap goes next to it with a `.pgm` extension.
    #[arg(long)]
    out: PathBuf,
    /// Average the score over all actions instead of using the greedy one.
    #[arg(long)]
    average: bool,
    /// Pixels per cell in the graymap.
    #[arg(long, default_value_t = 16)]
    scale: usize,
    #[arg(long)]
    no_image: bool,
}

#[derive(Args)]
struct Compare {
    /// Two or more config files. Each config's `seed` is the base seed.
    #[arg(required = true, num_args = 2..)]
    configs: Vec<PathBuf>,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 10)]
    n_seeds: usize,
    /// Output directory for per_seed.csv and aggregate.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "stitching")]
    pairs: PairsMode,
    #[arg(long, default_value_t = 200)]
    episodes: usize,
    /// Seed of the shared evaluation-pair stream.
    #[arg(long, default_value_t = 12345)]
    eval_seed: u64,
    #[arg(long)]
    feasible_only: bool,
}

/// Files and directories written by a command; removed unless the command
/// finishes.
#[derive(Default)]
struct Outputs {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    done: bool,
}

impl Outputs {
    fn dir(&mut self, path: &Path) -> Result<()> {
        if !path.exists() {
            fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
            self.dirs.push(path.to_path_buf());
        }
        Ok(())
    }

    fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        self.files.push(path.to_path_buf());
        fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
    }

    fn commit(mut self) {
        self.done = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.done {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = fs::remove_dir_all(d);
        }
    }
}

fn load_dataset(path: &Path) -> Result<OfflineDataset> {
    OfflineDataset::load(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn load_checkpoint(path: &Path, dataset: &OfflineDataset) -> Result<Checkpoint> {
    let ck = Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    ck.check_maze(dataset.maze())?;
    Ok(ck)
}

fn load_config(path: Option<&Path>) -> Result<TrainerConfig> {
    match path {
        Some(p) => TrainerConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(TrainerConfig::default()),
    }
}

/// Applies `--key value` pairs; dashes in key names are read as underscores.
fn apply_overrides(cfg: &mut TrainerConfig, args: &[String]) -> Result<()> {
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let Some(key) = flag.strip_prefix("--") else {
            bail!("expected a `--key` override, got `{flag}`");
        };
        let key = key.replace('-', "_");
        let Some(value) = it.next() else {
            bail!("override `--{key}` is missing its value");
        };
        cfg.set(&key, value)?;
    }
    cfg.validate()?;
    Ok(())
}

fn threads_from_env() -> Result<usize> {
    match std::env::var("RWS_THREADS") {
        Ok(v) => v.trim().parse().with_context(|| format!("RWS_THREADS=`{v}` is not a thread count")),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn gen_data(args: GenData) -> Result<()> {
    let dataset = match (&args.fixture, &args.maze) {
        (Some(name), _) if name == "stitching" => fixtures::stitching(),
        (Some(name), _) => bail!("unknown fixture `{name}`; expected stitching"),
        (None, Some(maze_path)) => {
            let maze = Maze::load(maze_path).with_context(|| format!("loading maze {}", maze_path.display()))?;
            let mut rng = SeededRng::seed_from_u64(args.seed);
            let opts = MixtureOptions { random_length: args.random_length };
            build_mixture(&maze, args.expert_ratio, args.n_traj, opts, &mut rng)?
        }
        (None, None) => bail!("either --maze or --fixture is required"),
    };
    let mut out = Outputs::default();
    out.write(&args.out, &dataset.to_text())?;
    out.commit();
    println!(
        "trajectories: {} (expert {}, random {})",
        dataset.trajectories().len(),
        dataset.count(Source::Expert),
        dataset.count(Source::Random)
    );
    println!("transitions: {}", dataset.n_transitions());
    println!("state coverage: {}", dataset.state_coverage());
    Ok(())
}

fn train(args: Train) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    apply_overrides(&mut cfg, &args.overrides)?;
    let dataset = load_dataset(&args.dataset)?;
    let run: Run = trainer::train(&dataset, &cfg)?;

    let mut out = Outputs::default();
    out.dir(&args.out)?;
    let ck = Checkpoint::new(run, cfg.delta, dataset.maze());
    out.write(&args.out.join("checkpoint.rwsq"), &ck.to_text())?;
    out.write(&args.out.join("metrics.csv"), &ck.run.metrics_csv())?;
    out.write(&args.out.join("config.txt"), &cfg.to_text())?;
    out.commit();

    if let Some(last) = ck.run.metrics.last() {
        println!("iterations: {}", last.iter);
        println!("final pu_loss: {}", last.pu_loss);
        if let Some(sr) = last.success_rate {
            println!("in-trajectory success rate: {sr}");
        }
    }
    Ok(())
}

fn evaluate(args: Eval) -> Result<()> {
    let dataset = load_dataset(&args.dataset)?;
    let ck = load_checkpoint(&args.checkpoint, &dataset)?;
    let pairs = eval::held_out_pairs(&dataset, args.pairs, args.episodes, args.seed, args.feasible_only)?;
    let mut csv = String::from("start_x,start_y,goal_x,goal_y,success,steps\n");
    let mut hits = 0usize;
    for (s, g) in &pairs {
        let r = eval::rollout(&ck.run.policy, dataset.maze(), *s, *g, ck.delta, args.max_steps)?;
        hits += usize::from(r.success);
        let _ = writeln!(csv, "{},{},{},{},{},{}", s.x, s.y, g.x, g.y, u8::from(r.success), r.steps);
    }
    let mut out = Outputs::default();
    out.write(&args.out, &csv)?;
    out.commit();
    println!("pairs: {}", pairs.len());
    println!("success rate: {}", hits as f64 / pairs.len() as f64);
    Ok(())
}

fn heatmap(args: Heatmap) -> Result<()> {
    let dataset = load_dataset(&args.dataset)?;
    let ck = load_checkpoint(&args.checkpoint, &dataset)?;
    let maze = dataset.maze();
    let state = maze.state(args.x as i64, args.y as i64).context("heatmap state")?;
    let action = if args.average { HeatmapAction::Average } else { HeatmapAction::Greedy };
    let map = eval::weight_heatmap(state, &ck.run, maze, action)?;

    let mut out = Outputs::default();
    out.write(&args.out, &map.to_text())?;
    if !args.no_image {
        out.write(&args.out.with_extension("pgm"), &map.to_pgm(args.scale))?;
    }
    out.commit();

    let reachable = eval::reachability_oracle(&dataset, state);
    let (r, u) = eval::heatmap_partition_means(&map, &reachable);
    println!("oracle-reachable mean weight: {r}");
    println!("oracle-unreachable mean weight: {u}");
    Ok(())
}

fn compare(args: Compare) -> Result<()> {
    let configs = args.configs.iter().map(|p| load_config(Some(p))).collect::<Result<Vec<_>>>()?;
    let dataset = load_dataset(&args.dataset)?;
    let pairs = eval::held_out_pairs(&dataset, args.pairs, args.episodes, args.eval_seed, args.feasible_only)?;
    let report = eval::compare(&dataset, &configs, args.n_seeds, &pairs, threads_from_env()?)?;

    let mut out = Outputs::default();
    out.dir(&args.out)?;
    out.write(&args.out.join("per_seed.csv"), &report.per_seed_csv())?;
    out.write(&args.out.join("aggregate.csv"), &report.aggregate_csv())?;
    out.commit();
    print!("{}", report.aggregate_csv());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => evaluate(a),
        Command::Heatmap(a) => heatmap(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
