//! Calendar-conditioned LSTM decoder.
//!
//! The decoder starts from the encoder code (both `h` and `C`), consumes
//! the last observed cluster vector, and feeds each prediction back as the
//! next input. No horizon is baked into the weights: any number of steps
//! can be decoded given calendar features for them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Session, Tensor, Var};
use crate::data::CalendarFeature;
use crate::error::{shape_err, Error, Result};
use crate::nn::{lstm_cell_step, Dense, LstmCell};
use crate::preprocess::ClusterVector;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoderConfig {
    /// Must equal the encoder code length.
    pub hidden: usize,
    pub layers: usize,
    pub input_embed: usize,
    pub calendar_embed: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            hidden: 40,
            layers: 1,
            input_embed: 32,
            calendar_embed: 8,
        }
    }
}

/// Stacked cells; the first embeds the cluster vector and calendar, the
/// rest read the hidden state of the layer below. The output head reads
/// the top cell state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderParams {
    pub clusters: usize,
    pub cells: Vec<LstmCell>,
    pub head: Dense,
}

impl DecoderParams {
    pub fn build<F: Scalar, R: Rng + ?Sized>(
        cfg: &DecoderConfig,
        clusters: usize,
        store: &mut ParamStore<F>,
        rng: &mut R,
    ) -> Result<Self> {
        if cfg.hidden == 0 || cfg.layers == 0 || cfg.input_embed == 0 || cfg.calendar_embed == 0 || clusters == 0 {
            return Err(Error::Config(format!("decoder sizes must be positive: {cfg:?}")));
        }
        let mut cells = vec![LstmCell::new(
            store,
            "dec.l0",
            clusters,
            cfg.hidden,
            Some(cfg.input_embed),
            Some((4, cfg.calendar_embed)),
            rng,
        )];
        for l in 1..cfg.layers {
            cells.push(LstmCell::new(store, &format!("dec.l{l}"), cfg.hidden, cfg.hidden, None, None, rng));
        }
        let head = Dense::new(store, "dec.out", cfg.hidden, clusters, rng);
        Ok(Self { clusters, cells, head })
    }

    pub fn hidden(&self) -> usize {
        self.cells[0].hidden
    }
}

/// Per-layer hidden and cell states.
#[derive(Debug, Clone)]
pub struct DecoderState {
    pub h: Vec<Var>,
    pub c: Vec<Var>,
}

/// Sets every layer's `h` and `C` to the code.
pub fn init_state<F: Scalar>(s: &Session<'_, F>, code: Var, p: &DecoderParams) -> Result<DecoderState> {
    let n = s.tape.value(code).len();
    if s.tape.shape(code) != [1, n] || n != p.hidden() {
        return shape_err(format!(
            "code of shape {:?} does not match decoder hidden size {}",
            s.tape.shape(code),
            p.hidden()
        ));
    }
    Ok(DecoderState {
        h: vec![code; p.cells.len()],
        c: vec![code; p.cells.len()],
    })
}

/// Ground truth to feed instead of predictions.
///
/// When `active[j]` is set for `j >= 1`, step `j` consumes `targets[j - 1]`.
#[derive(Debug, Clone)]
pub struct Teacher<'a> {
    pub targets: &'a [ClusterVector],
    pub active: Vec<bool>,
}

impl<'a> Teacher<'a> {
    pub fn full(targets: &'a [ClusterVector]) -> Self {
        Self {
            targets,
            active: vec![true; targets.len() + 1],
        }
    }

    fn feeds(&self, step: usize) -> bool {
        step >= 1 && self.active.get(step).copied().unwrap_or(false)
    }
}

fn row<F: Scalar>(s: &mut Session<'_, F>, values: &[f64]) -> Result<Var> {
    s.constant(Tensor::row(values.iter().map(|&v| F::of(v)).collect()))
}

/// One stacked-cell step; returns the `[1 × K]` prediction.
fn step<F: Scalar>(s: &mut Session<'_, F>, state: &mut DecoderState, input: Var, calendar: Var, p: &DecoderParams) -> Result<Var> {
    let mut x = input;
    for (l, cell) in p.cells.iter().enumerate() {
        let cal = (l == 0).then_some(calendar);
        let (h, c) = lstm_cell_step(s, cell, state.h[l], state.c[l], x, cal)?;
        state.h[l] = h;
        state.c[l] = c;
        x = h;
    }
    let top = *state.c.last().expect("at least one layer");
    let logits = p.head.apply(s, top)?;
    s.tape.sigmoid(logits)
}

/// Decodes `steps` predictions, each a `[1 × K]` row in `(0, 1)`.
pub fn decode<F: Scalar>(
    s: &mut Session<'_, F>,
    mut state: DecoderState,
    last: &ClusterVector,
    calendar: &[CalendarFeature],
    steps: usize,
    teacher: Option<&Teacher<'_>>,
    p: &DecoderParams,
) -> Result<Vec<Var>> {
    if steps == 0 {
        return Err(Error::Config("decode needs at least one step".into()));
    }
    if calendar.len() < steps {
        return Err(Error::Config(format!(
            "{} calendar features for {steps} decode steps",
            calendar.len()
        )));
    }
    if last.values.len() != p.clusters {
        return shape_err(format!("last vector has {} clusters, decoder expects {}", last.values.len(), p.clusters));
    }
    if let Some(t) = teacher {
        if t.targets.len() + 1 < steps {
            return Err(Error::Config(format!(
                "{} teacher targets for {steps} decode steps",
                t.targets.len()
            )));
        }
    }
    let mut input = row(s, &last.values)?;
    let mut out = Vec::with_capacity(steps);
    for j in 0..steps {
        if let Some(t) = teacher.filter(|t| t.feeds(j)) {
            input = row(s, &t.targets[j - 1].values)?;
        }
        let cal = row(s, &calendar[j].to_array())?;
        let pred = step(s, &mut state, input, cal, p)?;
        out.push(pred);
        input = pred;
    }
    Ok(out)
}
