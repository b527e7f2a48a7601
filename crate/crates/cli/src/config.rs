//! Run configuration read from `--config <json>`.
//!
//! Every section is optional; missing fields take their defaults.

use std::fs;
use std::path::{Path, PathBuf};

use parkcast_core::data::SynthSpec;
use parkcast_core::decoder::DecoderConfig;
use parkcast_core::{EncoderConfig, EncoderKind, ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub model: ModelSection,
    pub train: TrainConfig,
    pub synth: SynthSpec,
    pub split: SplitSection,
    pub paths: Paths,
    pub serve: ServeSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: EncoderKind,
    /// Full encoder override; sized from the data when absent.
    pub encoder: Option<EncoderConfig>,
    pub decoder: Option<DecoderConfig>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: EncoderKind::Gnn,
            encoder: None,
            decoder: None,
        }
    }
}

/// Chronological split points as fractions of the frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub validation_at: f64,
    pub test_at: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            validation_at: 0.7,
            test_at: 0.85,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub lots: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub frames: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSection {
    pub port: u16,
}

impl Default for ServeSection {
    fn default() -> Self {
        Self { port: 8080 }
    }
}

impl AppConfig {
    pub fn load(path: Option<&Path>) -> AppResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|source| AppError::File {
            path: path.display().to_string(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Model architecture for `clusters` clusters, honoring overrides.
    pub fn model_config(&self, clusters: usize) -> AppResult<ModelConfig> {
        let mut cfg = ModelConfig::new(self.model.kind, self.train.history_len, clusters);
        if let Some(enc) = &self.model.encoder {
            if enc.clusters != clusters || enc.history_len != self.train.history_len {
                return Err(AppError::Usage(format!(
                    "encoder config is for {} clusters and history {}, data has {clusters} clusters and training uses {}",
                    enc.clusters, enc.history_len, self.train.history_len
                )));
            }
            cfg.encoder = enc.clone();
            cfg.decoder.hidden = enc.output_dim;
        }
        if let Some(dec) = &self.model.decoder {
            cfg.decoder = dec.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
