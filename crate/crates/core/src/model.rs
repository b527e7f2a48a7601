//! Encoder plus decoder over one parameter store.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Session, Var};
use crate::data::CalendarFeature;
use crate::decoder::{decode, init_state, DecoderConfig, DecoderParams, Teacher};
use crate::encoders::{resolve_shapes, EncoderConfig, EncoderKind, EncoderParams};
use crate::error::{Error, Result};
use crate::nn::{dropout, Mode};
use crate::preprocess::{ClusterVector, ProximityGraph};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    #[serde(default)]
    pub decoder: DecoderConfig,
}

impl ModelConfig {
    /// Default architecture for `kind`, with the decoder sized to the code.
    pub fn new(kind: EncoderKind, history_len: usize, clusters: usize) -> Self {
        let encoder = EncoderConfig::new(kind, history_len, clusters);
        let decoder = DecoderConfig {
            hidden: encoder.output_dim,
            ..DecoderConfig::default()
        };
        Self { encoder, decoder }
    }

    pub fn validate(&self) -> Result<()> {
        resolve_shapes(&self.encoder)?;
        if self.decoder.hidden != self.encoder.output_dim {
            return Err(Error::Config(format!(
                "decoder hidden size {} differs from encoder code length {}",
                self.decoder.hidden, self.encoder.output_dim
            )));
        }
        Ok(())
    }
}

/// Sequence-to-sequence forecaster.
///
/// Parameters are created in a fixed order from `init_seed`, so the same
/// configuration and seed always give the same store layout and values.
#[derive(Debug, Clone)]
pub struct Seq2Seq<F> {
    pub config: ModelConfig,
    pub graph: ProximityGraph,
    pub init_seed: u64,
    pub store: ParamStore<F>,
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
}

impl<F: Scalar> Seq2Seq<F> {
    pub fn new(config: ModelConfig, graph: ProximityGraph, init_seed: u64) -> Result<Self> {
        config.validate()?;
        if config.encoder.kind == EncoderKind::Gnn && graph.nodes != config.encoder.clusters {
            return Err(Error::Config(format!(
                "graph has {} nodes, model expects {} clusters",
                graph.nodes, config.encoder.clusters
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
        let mut store = ParamStore::new();
        let encoder = EncoderParams::build(&config.encoder, &mut store, &mut rng)?;
        let decoder = DecoderParams::build(&config.decoder, config.encoder.clusters, &mut store, &mut rng)?;
        Ok(Self {
            config,
            graph,
            init_seed,
            store,
            encoder,
            decoder,
        })
    }

    pub fn kind(&self) -> EncoderKind {
        self.config.encoder.kind
    }

    pub fn history_len(&self) -> usize {
        self.config.encoder.history_len
    }

    pub fn clusters(&self) -> usize {
        self.config.encoder.clusters
    }

    /// Records encode, optional dropout on the code, and decode on `s`.
    ///
    /// `calendar` holds the features of the predicted ticks.
    #[allow(clippy::too_many_arguments)]
    pub fn forward<R: Rng + ?Sized>(
        &self,
        s: &mut Session<'_, F>,
        input: &[ClusterVector],
        calendar: &[CalendarFeature],
        steps: usize,
        teacher: Option<&Teacher<'_>>,
        dropout_p: f64,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Vec<Var>> {
        if input.len() != self.history_len() {
            return Err(Error::Shape(format!(
                "history of {} steps, model expects {}",
                input.len(),
                self.history_len()
            )));
        }
        let code = self.encoder.encode(s, input, &self.graph)?;
        let code = dropout(s, code, dropout_p, mode, rng)?;
        let state = init_state(s, code, &self.decoder)?;
        let last = input.last().expect("non-empty history");
        decode(s, state, last, calendar, steps, teacher, &self.decoder)
    }

    /// Deterministic forecast of `steps` normalized cluster vectors.
    pub fn predict(&self, input: &[ClusterVector], calendar: &[CalendarFeature], steps: usize) -> Result<Vec<Vec<f64>>> {
        let mut s = Session::new(&self.store);
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        let out = self.forward(&mut s, input, calendar, steps, None, 0.0, Mode::Eval, &mut unused)?;
        Ok(out
            .iter()
            .map(|&v| s.value(v).data().iter().map(|x| x.to_f64_lossy()).collect())
            .collect())
    }
}
