use std::ops::Range;
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};

use crate::data::{calendar_features, CalendarFeature};
use crate::preprocess::ClusterVector;

/// Normalized cluster vectors on a regular time grid, with the calendar
/// feature of every tick.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSeries {
    pub epoch: DateTime<Utc>,
    pub interval: Duration,
    pub vectors: Vec<ClusterVector>,
    pub calendar: Vec<CalendarFeature>,
}

impl ClusterSeries {
    pub fn new(epoch: DateTime<Utc>, interval: Duration, vectors: Vec<ClusterVector>) -> Self {
        let calendar = vectors
            .iter()
            .map(|v| calendar_features(epoch + interval * v.step_index as i32))
            .collect();
        Self {
            epoch,
            interval,
            vectors,
            calendar,
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn clusters(&self) -> usize {
        self.vectors.first().map_or(0, |v| v.values.len())
    }

    pub fn timestamp(&self, step_index: i64) -> DateTime<Utc> {
        self.epoch + self.interval * step_index as i32
    }

    /// Values of one cluster across time.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.vectors.iter().map(|v| v.values[k]).collect()
    }
}

/// One training example borrowed from a [`ClusterSeries`].
#[derive(Debug, Clone, Copy)]
pub struct Window<'a> {
    /// Series index of the first input vector.
    pub start: usize,
    pub input: &'a [ClusterVector],
    pub target: &'a [ClusterVector],
    /// Calendar features of the target ticks.
    pub calendar: &'a [CalendarFeature],
}

/// Stride-1 windows of `history` inputs followed by `horizon` targets.
#[derive(Debug, Clone)]
pub struct WindowSet {
    series: Arc<ClusterSeries>,
    starts: Range<usize>,
    history: usize,
    horizon: usize,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn history(&self) -> usize {
        self.history
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn series(&self) -> &Arc<ClusterSeries> {
        &self.series
    }

    pub fn get(&self, i: usize) -> Window<'_> {
        assert!(i < self.len(), "window {i} out of {}", self.len());
        let start = self.starts.start + i;
        let mid = start + self.history;
        let end = mid + self.horizon;
        Window {
            start,
            input: &self.series.vectors[start..mid],
            target: &self.series.vectors[mid..end],
            calendar: &self.series.calendar[mid..end],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Window<'_>> {
        (0..self.len()).map(move |i| self.get(i))
    }

    /// Keeps every `step`-th window.
    pub fn strided(&self, step: usize) -> Vec<usize> {
        (0..self.len()).step_by(step.max(1)).collect()
    }
}

/// Windows lying entirely within `range` of the series.
///
/// A range shorter than `history + horizon` yields no windows.
pub fn make_windows(series: Arc<ClusterSeries>, range: Range<usize>, history: usize, horizon: usize) -> WindowSet {
    let range = range.start.min(series.len())..range.end.min(series.len());
    let span = history + horizon;
    let count = if range.len() >= span && span > 0 {
        range.len() - span + 1
    } else {
        log::warn!(
            "range of {} steps is too short for {} + {} windows",
            range.len(),
            history,
            horizon
        );
        0
    };
    WindowSet {
        series,
        starts: range.start..range.start + count,
        history,
        horizon,
    }
}
