mod common;

use std::fs;
use std::path::Path;

use parkcast::forecast::Prediction;

use common::*;

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// synth, ingest and preprocess into `dir/o`.
fn prepare(dir: &Path, seed: &str) {
    parkcast_ok(dir, &["--out", "o", "--seed", seed, "synth", "--weeks", "4"]);
    parkcast_ok(dir, &["--out", "o", "ingest"]);
    parkcast_ok(dir, &["--out", "o", "preprocess"]);
}

#[test]
fn synth_is_reproducible_per_seed() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (dir, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        parkcast_ok(dir.path(), &["--out", ".", "--seed", seed, "synth", "--weeks", "1"]);
    }
    for name in ["lots.csv", "events.csv"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }
    assert_ne!(read(a.path(), "events.csv"), read(c.path(), "events.csv"));
}

#[test]
fn pipeline_trains_reproducibly_and_predicts_like_the_library() {
    let runs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for dir in &runs {
        let d = dir.path();
        prepare(d, "7");
        fs::write(d.join("cfg.json"), QUICK_CONFIG).unwrap();
        parkcast_ok(d, &["--config", "cfg.json", "--out", "o", "--seed", "3", "train"]);
    }
    let (a, b) = (runs[0].path().join("o"), runs[1].path().join("o"));
    for name in ["frames.csv", "series.csv", "history.csv", "model.ckpt"] {
        assert_eq!(read(&a, name), read(&b, name), "{name} differs between runs");
    }
    let graph: serde_json::Value = serde_json::from_slice(&read(&a, "graph.json")).unwrap();
    assert_eq!(graph["nodes"], 27);

    // eval: one row per cluster and horizon plus the city-wide rows
    let d = runs[0].path();
    let out = parkcast_ok(d, &["--config", "cfg.json", "--out", "o", "eval"]);
    let report = String::from_utf8(read(&a, "report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 27 * 4 + 4);
    assert!(String::from_utf8_lossy(&out.stdout).contains("seasonal"));
    let all: serde_json::Value = serde_json::from_slice(&read(&a, "report.json")).unwrap();
    assert_eq!(all.as_array().unwrap().len(), 4);

    // predict against a forecast built from the same files by hand
    let out = parkcast_ok(d, &["--out", "o", "predict", "--horizon", "8"]);
    let printed: Prediction = serde_json::from_slice(&out.stdout).unwrap();
    let saved: Prediction = serde_json::from_slice(&read(&a, "prediction.json")).unwrap();
    assert_eq!(printed, saved);

    let (ck, want, last_tick) = library_prediction(&a, 8);
    let got: Vec<Vec<f64>> = saved.steps.iter().map(|s| s.clusters.clone()).collect();
    assert_eq!(got, want);
    assert_eq!(saved.generated_at, last_tick);
    assert_eq!(saved.model, ck.model_id().unwrap());
}

#[test]
fn usage_errors_exit_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["--bogus"][..], &["train", "--kind", "transformer"], &[]] {
        assert_eq!(parkcast(dir.path(), args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn runtime_errors_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let out = parkcast(dir.path(), &["--out", ".", "predict"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error:") && err.contains("model.ckpt"), "{err}");

    fs::write(dir.path().join("bad.json"), r#"{"train": {"epochz": 3}}"#).unwrap();
    let out = parkcast(dir.path(), &["--config", "bad.json", "synth"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epochz"));

    fs::write(dir.path().join("cfg.json"), r#"{"train": {"epochs": 1}}"#).unwrap();
    parkcast_ok(dir.path(), &["--out", ".", "--seed", "1", "synth", "--weeks", "1"]);
    let out = parkcast(dir.path(), &["--out", ".", "predict", "--checkpoint", "lots.csv"]);
    assert_eq!(out.status.code(), Some(1));
}
