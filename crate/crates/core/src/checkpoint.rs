//! Self-describing model checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   8 bytes  "PKCASTCK"
//! version u32
//! hlen    u64      length of the JSON header
//! header  hlen bytes
//! params  f64 blocks in header order
//! digest  32 bytes sha256 of everything before it
//! ```

use std::fs;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, Seq2Seq};
use crate::preprocess::{ClusterMap, ProximityGraph};
use crate::training::{hex, TrainConfig};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"PKCASTCK";
const PREFIX: usize = 8 + 4 + 8;
const DIGEST: usize = 32;

/// A trained model with everything needed to serve it.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Seq2Seq<f64>,
    pub map: ClusterMap,
    pub train: TrainConfig,
    /// Hex sha256 of the training history CSV.
    pub history_digest: String,
    /// Tick 0 of the series the model was trained on.
    pub series_epoch: DateTime<Utc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    model: ModelConfig,
    init_seed: u64,
    graph: ProximityGraph,
    cluster_map: ClusterMap,
    train: TrainConfig,
    history_digest: String,
    series_epoch: DateTime<Utc>,
    params: Vec<ParamEntry>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let store = &self.model.store;
        let header = Header {
            format_version: FORMAT_VERSION,
            model: self.model.config.clone(),
            init_seed: self.model.init_seed,
            graph: self.model.graph.clone(),
            cluster_map: self.map.clone(),
            train: self.train.clone(),
            history_digest: self.history_digest.clone(),
            series_epoch: self.series_epoch,
            params: store
                .iter()
                .map(|(name, t)| ParamEntry {
                    name: name.to_string(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(PREFIX + json.len() + 8 * store.num_scalars() + DIGEST);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in store.iter() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < PREFIX + DIGEST {
            return Err(Error::Corrupt(format!("file of {} bytes is truncated", bytes.len())));
        }
        if &bytes[..8] != MAGIC {
            return Err(Error::Corrupt("not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST);
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::Corrupt("content digest does not match".into()));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        if hlen > body.len() - PREFIX {
            return Err(Error::Corrupt("header length exceeds file".into()));
        }
        let header: Header = serde_json::from_slice(&body[PREFIX..PREFIX + hlen])?;
        let mut model = Seq2Seq::<f64>::new(header.model, header.graph, header.init_seed)?;

        let ids: Vec<_> = model.store.ids().collect();
        if ids.len() != header.params.len() {
            return Err(Error::Corrupt(format!(
                "{} parameter blocks for a model with {}",
                header.params.len(),
                ids.len()
            )));
        }
        let mut data = &body[PREFIX + hlen..];
        for (id, entry) in ids.into_iter().zip(&header.params) {
            let t = model.store.get(id);
            if model.store.name(id) != entry.name || t.shape() != entry.shape.as_slice() {
                return Err(Error::Corrupt(format!(
                    "parameter {} {:?} does not match model parameter {} {:?}",
                    entry.name,
                    entry.shape,
                    model.store.name(id),
                    t.shape()
                )));
            }
            let n = t.len() * 8;
            if data.len() < n {
                return Err(Error::Corrupt(format!("parameter {} is truncated", entry.name)));
            }
            let values: Vec<f64> = data[..n]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            model.store.set_data(id, &values)?;
            data = &data[n..];
        }
        if !data.is_empty() {
            return Err(Error::Corrupt(format!("{} trailing bytes after parameters", data.len())));
        }
        Ok(Self {
            model,
            map: header.cluster_map,
            train: header.train,
            history_digest: header.history_digest,
            series_epoch: header.series_epoch,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Short id derived from the content digest.
    pub fn model_id(&self) -> Result<String> {
        let bytes = self.to_bytes()?;
        Ok(format!(
            "{}-{}",
            self.model.kind(),
            &hex(&bytes[bytes.len() - DIGEST..])[..12]
        ))
    }
}
