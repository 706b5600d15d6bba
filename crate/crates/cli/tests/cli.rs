//! End-to-end runs of the `rws` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rws_core::{OfflineDataset, Source};

const BIN: &str = env!("CARGO_BIN_EXE_rws");

fn maze(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../mazes").join(name)
}

fn rws(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("RWS_THREADS", "0").output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = rws(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn err(args: &[&str]) -> String {
    let out = rws(args);
    assert!(!out.status.success(), "{args:?} should fail");
    String::from_utf8(out.stderr).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stitching(dir: &Path) -> PathBuf {
    let path = dir.join("stitching.txt");
    ok(&["gen-data", "--fixture", "stitching", "--out", s(&path)]);
    path
}

fn train(dir: &Path, dataset: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec!["train", "--dataset", s(dataset), "--out", s(&out)];
    args.extend_from_slice(extra);
    ok(&args);
    out
}

#[test]
fn gen_data_counts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    let m = maze("rooms15.txt");
    let gen = |out: &Path| ok(&["gen-data", "--maze", s(&m), "--expert-ratio", "0.5", "--n-traj", "100", "--seed", "9", "--out", s(out)]);
    let stdout = gen(&a);
    assert!(stdout.contains("trajectories: 100 (expert 50, random 50)"), "{stdout}");
    assert!(stdout.contains("state coverage: "));
    gen(&b);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let d = OfflineDataset::load(&a).unwrap();
    assert_eq!(d.count(Source::Expert), 50);

    let z = dir.path().join("z.txt");
    let e = err(&["gen-data", "--maze", s(&m), "--n-traj", "0", "--out", s(&z)]);
    assert!(e.contains("at least one trajectory"), "{e}");
    assert!(!z.exists());
}

#[test]
fn train_outputs_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let data = stitching(dir.path());
    let cfg = dir.path().join("uniform.cfg");
    fs::write(&cfg, "sampler = uniform\niterations = 120\n").unwrap();
    let out = dir.path().join("uni");
    ok(&["train", "--config", s(&cfg), "--dataset", s(&data), "--out", s(&out), "--batch-size", "64"]);
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 121);
    assert!(metrics.starts_with("iter,pu_loss,mean_w,max_w,td_err,success_rate\n"));
    let echoed = fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(echoed.contains("sampler = uniform") && echoed.contains("batch_size = 64"));
    assert!(out.join("checkpoint.rwsq").exists());

    let rws_a = train(dir.path(), &data, "rws_a", &["--iterations", "150", "--seed", "3"]);
    let rws_b = train(dir.path(), &data, "rws_b", &["--iterations", "150", "--seed", "3"]);
    let ma = fs::read_to_string(rws_a.join("metrics.csv")).unwrap();
    assert_eq!(ma, fs::read_to_string(rws_b.join("metrics.csv")).unwrap());
    assert_eq!(fs::read(rws_a.join("checkpoint.rwsq")).unwrap(), fs::read(rws_b.join("checkpoint.rwsq")).unwrap());
    for line in ma.lines().skip(1) {
        let pu: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(pu.is_finite() && pu >= 0.0, "{line}");
    }
}

#[test]
fn train_failures_name_the_problem_and_leave_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let data = stitching(dir.path());
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "gamma = 0.9\nlearning_rate = 0.1\n").unwrap();
    let out = dir.path().join("run");
    let e = err(&["train", "--config", s(&bad), "--dataset", s(&data), "--out", s(&out)]);
    assert!(e.contains("learning_rate"), "{e}");
    let e = err(&["train", "--dataset", s(&data), "--out", s(&out), "--gama", "0.9"]);
    assert!(e.contains("gama"), "{e}");
    let e = err(&["train", "--dataset", s(&data), "--out", s(&out), "--gamma", "1.5"]);
    assert!(e.contains("gamma"), "{e}");
    assert!(!out.exists());
}

#[test]
fn eval_rows_modes_and_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let data = stitching(dir.path());
    let run = train(dir.path(), &data, "run", &["--iterations", "3000"]);
    let ck = run.join("checkpoint.rwsq");

    let one = dir.path().join("one.csv");
    ok(&["eval", "--checkpoint", s(&ck), "--dataset", s(&data), "--episodes", "1", "--out", s(&one)]);
    assert_eq!(fs::read_to_string(&one).unwrap().lines().count(), 2);

    // Expert-only data, converged policy: in-trajectory goals are reached.
    let csv = dir.path().join("in.csv");
    let stdout = ok(&["eval", "--checkpoint", s(&ck), "--dataset", s(&data), "--pairs", "in_trajectory", "--episodes", "200", "--out", s(&csv)]);
    let rate: f64 = stdout.lines().find_map(|l| l.strip_prefix("success rate: ")).unwrap().parse().unwrap();
    assert!(rate >= 0.95, "{rate}");

    let st = dir.path().join("st.csv");
    let again = dir.path().join("st2.csv");
    ok(&["eval", "--checkpoint", s(&ck), "--dataset", s(&data), "--pairs", "stitching", "--episodes", "40", "--seed", "5", "--out", s(&st)]);
    ok(&["eval", "--checkpoint", s(&ck), "--dataset", s(&data), "--pairs", "stitching", "--episodes", "40", "--seed", "5", "--out", s(&again)]);
    assert_eq!(fs::read(&st).unwrap(), fs::read(&again).unwrap());
    assert_eq!(fs::read_to_string(&st).unwrap().lines().count(), 41);

    let other = dir.path().join("other.txt");
    ok(&["gen-data", "--maze", s(&maze("open8.txt")), "--n-traj", "5", "--out", s(&other)]);
    let e = err(&["eval", "--checkpoint", s(&ck), "--dataset", s(&other), "--out", s(&dir.path().join("x.csv"))]);
    assert!(e.contains("different"), "{e}");
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn heatmap_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = stitching(dir.path());
    let run = train(dir.path(), &data, "run", &["--iterations", "500"]);
    let ck = run.join("checkpoint.rwsq");
    let out = dir.path().join("h.txt");
    ok(&["heatmap", "--checkpoint", s(&ck), "--dataset", s(&data), "--x", "0", "--y", "7", "--out", s(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<f64>> = text.lines().map(|l| l.split(' ').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 15);
    assert!(rows.iter().all(|r| r.len() == 15));
    // Rows run from y = 0; the wall block at x 10..=12, y 1..=3 is NaN.
    assert!(rows[1][10].is_nan() && rows[3][12].is_nan() && !rows[0][10].is_nan());
    let free: Vec<f64> = rows.iter().flatten().copied().filter(|v| !v.is_nan()).collect();
    assert!((free.iter().sum::<f64>() / free.len() as f64 - 1.0).abs() < 1e-9);
    assert!(fs::read_to_string(out.with_extension("pgm")).unwrap().starts_with("P2\n240 240\n255\n"));

    let wall = dir.path().join("wall.txt");
    let e = err(&["heatmap", "--checkpoint", s(&ck), "--dataset", s(&data), "--x", "11", "--y", "2", "--out", s(&wall)]);
    assert!(e.contains("(11, 2)"), "{e}");
    assert!(!wall.exists());
}

#[test]
fn compare_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = stitching(dir.path());
    let a = dir.path().join("rws.cfg");
    let b = dir.path().join("uniform.cfg");
    fs::write(&a, "iterations = 100\nbatch_size = 64\nseed = 40\n").unwrap();
    fs::write(&b, "iterations = 100\nbatch_size = 64\nseed = 40\nsampler = uniform\n").unwrap();
    let run = |out: &Path, threads: &str| {
        let st = Command::new(BIN)
            .args(["compare", s(&a), s(&b), "--dataset", s(&data), "--n-seeds", "3", "--episodes", "50", "--out", s(out)])
            .env("RWS_THREADS", threads)
            .output()
            .unwrap();
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    };
    let serial = dir.path().join("serial");
    let pooled = dir.path().join("pooled");
    run(&serial, "0");
    run(&pooled, "3");
    let per_seed = fs::read_to_string(serial.join("per_seed.csv")).unwrap();
    assert_eq!(per_seed.lines().count(), 7);
    let seeds: Vec<&str> = per_seed.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(seeds, ["40", "41", "42", "40", "41", "42"]);
    let agg = fs::read_to_string(serial.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 3);
    assert!(agg.starts_with("sampler,mean,stderr,n_seeds\nrws,"));
    for f in ["per_seed.csv", "aggregate.csv"] {
        assert_eq!(fs::read(serial.join(f)).unwrap(), fs::read(pooled.join(f)).unwrap());
    }

    let e = err(&["compare", s(&a), "--dataset", s(&data), "--out", s(&dir.path().join("one"))]);
    assert!(e.contains("2 values required"), "{e}");
}
