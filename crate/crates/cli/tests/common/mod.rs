//! Fixtures shared by the service, CLI and acceptance tests.
#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::{DateTime, Duration, Utc};
use http_body_util::BodyExt;
use parkcast::commands::FramesMeta;
use parkcast::forecast::Predictor;
use parkcast::service::{router, AppState};
use parkcast_core::data::{
    calendar_features, generate_synthetic, read_frames_for, resample, split_by_fractions, write_frames, SynthSpec,
    STEP_MINUTES,
};
use parkcast_core::preprocess::normalize;
use parkcast_core::{Checkpoint, Dataset, EncoderKind, Model, ModelConfig, TrainConfig};
use tower::ServiceExt;

/// A one-week synthetic city, its frame file as CSV lines (header first)
/// and an untrained checkpoint over it.
pub struct Fixture {
    pub dataset: Dataset,
    pub lines: Vec<String>,
    pub checkpoint: Checkpoint,
}

pub fn fixture(kind: EncoderKind, seed: u64) -> Fixture {
    let spec = SynthSpec {
        weeks: 1,
        ..Default::default()
    };
    let (registry, events) = generate_synthetic(&spec, seed).unwrap();
    let frames = resample(&events, &registry, spec.range(), Duration::minutes(STEP_MINUTES)).unwrap();
    let mut csv = Vec::new();
    write_frames(&frames.frames, &registry, &mut csv).unwrap();
    let lines = String::from_utf8(csv).unwrap().lines().map(str::to_owned).collect();
    let split = split_by_fractions(frames.len(), 0.7, 0.85).unwrap();
    let dataset = Dataset::from_frames(&registry, &frames, split).unwrap();
    let model = Model::new(ModelConfig::new(kind, 48, dataset.clusters()), dataset.graph.clone(), seed).unwrap();
    let checkpoint = Checkpoint {
        model,
        map: dataset.map.clone(),
        train: TrainConfig::default(),
        history_digest: "0".repeat(64),
        series_epoch: dataset.series.epoch,
    };
    Fixture {
        dataset,
        lines,
        checkpoint,
    }
}

/// Free-lot forecast straight from the model: history is ticks
/// `end-48..end` of the series, calendar features from the series clock.
pub fn offline_forecast(ck: &Checkpoint, d: &Dataset, end: usize, steps: usize) -> Vec<Vec<f64>> {
    let m = ck.model.history_len();
    let history = &d.series.vectors[end - m..end];
    let calendar: Vec<_> = (end..end + steps).map(|t| calendar_features(d.series.timestamp(t as i64))).collect();
    let normalized = ck.model.predict(history, &calendar, steps).unwrap();
    normalized
        .iter()
        .map(|row| row.iter().zip(&ck.map.sizes).map(|(p, &n)| p * n as f64).collect())
        .collect()
}

/// Service state with the first `ticks` frames of the fixture ingested.
pub fn warmed_state(f: &Fixture, ticks: usize) -> Arc<AppState> {
    let state = AppState::new(Predictor::new(f.checkpoint.clone()).unwrap());
    for line in &f.lines[1..=ticks] {
        state.ingest_line(line).unwrap();
    }
    state
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, serde_json::Value, Vec<u8>) {
    let req = Request::builder().uri(uri).body(Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    let json = serde_json::from_slice(&bytes).unwrap_or(serde_json::Value::Null);
    (status, json, bytes)
}

pub fn app(state: Arc<AppState>) -> Router {
    router(state)
}

pub fn steps_of(body: &serde_json::Value) -> Vec<Vec<f64>> {
    body["steps"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["clusters"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect())
        .collect()
}

pub fn parkcast(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parkcast"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

/// Runs the binary and panics with its stderr on failure.
pub fn parkcast_ok(dir: &Path, args: &[&str]) -> Output {
    let out = parkcast(dir, args);
    assert!(
        out.status.success(),
        "parkcast {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// One cheap RNN epoch, enough to exercise the pipeline.
pub const QUICK_CONFIG: &str =
    r#"{"model": {"kind": "rnn"}, "train": {"epochs": 1, "batch_size": 64, "train_stride": 8, "val_stride": 8}}"#;

/// What `predict` should print for the files in `out`: per-step cluster
/// counts and the time of the last frame, decoded by the library directly.
pub fn library_prediction(out: &Path, steps: usize) -> (Checkpoint, Vec<Vec<f64>>, DateTime<Utc>) {
    let ck = Checkpoint::load(out.join("model.ckpt")).unwrap();
    let meta: FramesMeta = serde_json::from_slice(&std::fs::read(out.join("frames.json")).unwrap()).unwrap();
    let frames = read_frames_for(std::fs::File::open(out.join("frames.csv")).unwrap(), &ck.map.lot_ids).unwrap();
    let vectors = normalize(&frames, &ck.map).unwrap();
    let n = vectors.len();
    let m = ck.model.history_len();
    let tick = |i: usize| meta.epoch + Duration::minutes(STEP_MINUTES * i as i64);
    let calendar: Vec<_> = (n..n + steps).map(|i| calendar_features(tick(i))).collect();
    let counts = ck
        .model
        .predict(&vectors[n - m..], &calendar, steps)
        .unwrap()
        .iter()
        .map(|row| row.iter().zip(&ck.map.sizes).map(|(p, &k)| p * k as f64).collect())
        .collect();
    (ck, counts, tick(n - 1))
}
