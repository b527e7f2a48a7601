//! Events to windows in one place.

use std::ops::Range;
use std::sync::Arc;

use chrono::Duration;

use crate::data::{
    generate_synthetic, resample, split_by_fractions, DatasetSplit, FrameSeries, LotRegistry, ParkingEvent, SynthSpec,
    TimeRange, STEP_MINUTES,
};
use crate::error::Result;
use crate::preprocess::{build_graph, cluster_lots, make_windows, normalize, ClusterMap, ClusterSeries, ProximityGraph, WindowSet, DEFAULT_THRESHOLD_M};

/// Normalized cluster series with its map, proximity graph and split.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub map: ClusterMap,
    pub graph: ProximityGraph,
    pub series: Arc<ClusterSeries>,
    pub split: DatasetSplit,
}

impl Dataset {
    pub fn from_frames(registry: &LotRegistry, frames: &FrameSeries, split: DatasetSplit) -> Result<Self> {
        let map = cluster_lots(registry)?;
        let graph = build_graph(&map, DEFAULT_THRESHOLD_M)?;
        let vectors = normalize(&frames.frames, &map)?;
        let series = Arc::new(ClusterSeries::new(frames.epoch, frames.interval, vectors));
        Ok(Self {
            map,
            graph,
            series,
            split,
        })
    }

    /// Resamples `events` over `range` and splits by fractions of the ticks.
    pub fn from_events(
        registry: &LotRegistry,
        events: &[ParkingEvent],
        range: TimeRange,
        validation_at: f64,
        test_at: f64,
    ) -> Result<Self> {
        let frames = resample(events, registry, range, Duration::minutes(STEP_MINUTES))?;
        let split = split_by_fractions(frames.frames.len(), validation_at, test_at)?;
        Self::from_frames(registry, &frames, split)
    }

    pub fn synthetic(spec: &SynthSpec, seed: u64, validation_at: f64, test_at: f64) -> Result<Self> {
        let (registry, events) = generate_synthetic(spec, seed)?;
        Self::from_events(&registry, &events, spec.range(), validation_at, test_at)
    }

    pub fn clusters(&self) -> usize {
        self.map.sizes.len()
    }

    pub fn windows(&self, range: Range<usize>, history: usize, horizon: usize) -> WindowSet {
        make_windows(Arc::clone(&self.series), range, history, horizon)
    }

    pub fn train_windows(&self, history: usize, horizon: usize) -> WindowSet {
        self.windows(self.split.train.clone(), history, horizon)
    }

    pub fn validation_windows(&self, history: usize, horizon: usize) -> WindowSet {
        self.windows(self.split.validation.clone(), history, horizon)
    }

    /// Test windows may draw their history from before the test range, so
    /// every test tick can be a forecast target.
    pub fn test_windows(&self, history: usize, horizon: usize) -> WindowSet {
        let t = &self.split.test;
        self.windows(t.start.saturating_sub(history)..t.end, history, horizon)
    }
}
