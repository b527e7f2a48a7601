//! Turning a buffer snapshot into a count forecast.

use chrono::{DateTime, Duration, Utc};
use parkcast_core::data::{calendar_features, STEP_MINUTES};
use parkcast_core::preprocess::ClusterVector;
use parkcast_core::Checkpoint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::buffer::{Snapshot, BUFFER_STEPS};

/// Longest forecast served, one day of ticks.
pub const MAX_STEPS: usize = BUFFER_STEPS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepForecast {
    pub offset_min: i64,
    /// Expected free lots per cluster.
    pub clusters: Vec<f64>,
    pub city_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub model: String,
    /// Time of the newest tick the forecast starts from.
    pub generated_at: DateTime<Utc>,
    pub steps: Vec<StepForecast>,
}

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("steps must be between 1 and {MAX_STEPS}, got {0}")]
    Steps(usize),

    #[error("buffer holds {have} of the {need} steps needed")]
    Warming { have: usize, need: usize },

    #[error(transparent)]
    Model(#[from] parkcast_core::Error),
}

/// An immutable checkpoint ready to forecast.
#[derive(Debug)]
pub struct Predictor {
    pub checkpoint: Checkpoint,
    pub model_id: String,
}

impl Predictor {
    pub fn new(checkpoint: Checkpoint) -> parkcast_core::Result<Self> {
        let model_id = checkpoint.model_id()?;
        Ok(Self { checkpoint, model_id })
    }

    pub fn history_len(&self) -> usize {
        self.checkpoint.model.history_len()
    }

    pub fn timestamp(&self, step_index: i64) -> DateTime<Utc> {
        self.checkpoint.series_epoch + Duration::minutes(STEP_MINUTES * step_index)
    }

    /// Normalized forecast of `steps` ticks after the end of `history`.
    pub fn forecast_normalized(&self, history: &[ClusterVector], steps: usize) -> Result<Vec<Vec<f64>>, PredictError> {
        let last = history.last().map_or(-1, |v| v.step_index);
        let calendar: Vec<_> = (1..=steps as i64).map(|j| calendar_features(self.timestamp(last + j))).collect();
        Ok(self.checkpoint.model.predict(history, &calendar, steps)?)
    }

    pub fn predict(&self, snapshot: &Snapshot, steps: usize) -> Result<Prediction, PredictError> {
        if !(1..=MAX_STEPS).contains(&steps) {
            return Err(PredictError::Steps(steps));
        }
        let need = self.history_len();
        let history = snapshot.tail(need).ok_or(PredictError::Warming {
            have: snapshot.len(),
            need,
        })?;
        let normalized = self.forecast_normalized(history, steps)?;
        let sizes = &self.checkpoint.map.sizes;
        let steps = normalized
            .iter()
            .enumerate()
            .map(|(j, row)| {
                let clusters: Vec<f64> = row.iter().zip(sizes).map(|(p, &n)| p * n as f64).collect();
                StepForecast {
                    offset_min: STEP_MINUTES * (j as i64 + 1),
                    city_total: clusters.iter().sum(),
                    clusters,
                }
            })
            .collect();
        let last = history.last().expect("non-empty history").step_index;
        Ok(Prediction {
            model: self.model_id.clone(),
            generated_at: self.timestamp(last),
            steps,
        })
    }
}
