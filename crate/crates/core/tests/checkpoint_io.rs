//! Checkpoint files written by one run and read back by another.

use rws_core::dataset::fixtures;
use rws_core::eval::{weight_heatmap, HeatmapAction};
use rws_core::*;

#[test]
fn file_round_trip_preserves_behaviour() {
    let d = fixtures::stitching();
    let cfg = TrainerConfig { iterations: 400, ..TrainerConfig::default() };
    let run: Run = trainer::train(&d, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.rwsq");
    Checkpoint::new(run.clone(), cfg.delta, d.maze()).save(&path).unwrap();

    let back = Checkpoint::load(&path).unwrap();
    back.check_maze(d.maze()).unwrap();
    assert_eq!(back.run.q, run.q);
    assert_eq!(back.run.policy, run.policy);
    assert_eq!(back.run.classifier, run.classifier);
    let a = weight_heatmap(fixtures::STITCHING_PROBE, &run, d.maze(), HeatmapAction::Greedy).unwrap();
    let b = weight_heatmap(fixtures::STITCHING_PROBE, &back.run, d.maze(), HeatmapAction::Greedy).unwrap();
    assert_eq!(a.to_text(), b.to_text());
    // Saving the reloaded checkpoint reproduces the file byte for byte.
    assert_eq!(std::fs::read_to_string(&path).unwrap(), back.to_text());
}

#[test]
fn f32_checkpoints_round_trip() {
    let d = fixtures::stitching();
    let cfg = TrainerConfig { iterations: 50, batch_size: 64, ..TrainerConfig::default() };
    let run: Run32 = trainer::train(&d, &cfg).unwrap();
    let ck = checkpoint::Checkpoint::new(run.clone(), 0.5f32, d.maze());
    let back = checkpoint::Checkpoint::<f32>::parse(&ck.to_text()).unwrap();
    assert_eq!(back.run.q, run.q);
    assert_eq!(back.run.policy, run.policy);
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(Checkpoint::load(dir.path().join("nope.rwsq")), Err(Error::Io(_))));
}
