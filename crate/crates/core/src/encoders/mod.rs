//! History encoders mapping `M` past cluster vectors to a fixed-size code.
//!
//! * GNN: gated convolutions over each node's history and zero-padded
//!   state, gated graph propagation over the proximity graph, a per-node
//!   output head, then gated convolutions over the node outputs
//!   concatenated in cluster-id order.
//! * CNN: gated convolutions over the `clusters × M` history matrix with
//!   one max-pool stage.
//! * RNN: an LSTM with ReLU input embedding, code = final hidden state.

mod config;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use config::{
    resolve_shapes, CnnConfig, ConvSpec, EncoderConfig, EncoderKind, GnnConfig, GraphPlan, LayerPlan,
    RnnConfig, ShapePlan,
};

use crate::autodiff::{ParamStore, Session, Tensor, Var};
use crate::error::{shape_err, Result};
use crate::nn::{conv1d_gated, ggnn_output, ggnn_propagate, lstm_cell_step, ConvParams, GgnnParams, LstmCell};
use crate::preprocess::{ClusterVector, ProximityGraph};
use crate::scalar::Scalar;

/// Per-node history `a` (`K × M`) and its zero-padded copy `h` (`K × H`).
#[derive(Debug, Clone, PartialEq)]
pub struct NodeHistory {
    pub clusters: usize,
    pub history_len: usize,
    pub pad_len: usize,
    pub a: Vec<f64>,
    pub h: Vec<f64>,
}

impl NodeHistory {
    pub fn from_vectors(input: &[ClusterVector], pad_len: usize) -> Result<Self> {
        let m = input.len();
        let k = input.first().map_or(0, |v| v.values.len());
        if m == 0 || k == 0 {
            return shape_err("node history needs at least one step and one cluster");
        }
        if pad_len < m {
            return shape_err(format!("pad length {pad_len} shorter than history {m}"));
        }
        let mut a = vec![0.0; k * m];
        let mut h = vec![0.0; k * pad_len];
        for (t, v) in input.iter().enumerate() {
            if v.values.len() != k {
                return shape_err(format!("step {t} has {} clusters, expected {k}", v.values.len()));
            }
            for (node, &x) in v.values.iter().enumerate() {
                a[node * m + t] = x;
                h[node * pad_len + t] = x;
            }
        }
        Ok(Self {
            clusters: k,
            history_len: m,
            pad_len,
            a,
            h,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnEncoder {
    pub annotation: ConvParams,
    pub hidden: ConvParams,
    pub ggnn: GgnnParams,
    pub trailing: Vec<ConvParams>,
    pub history_len: usize,
    pub pad_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnEncoder {
    pub history_len: usize,
    pub convs: Vec<ConvParams>,
    pub pool_size: usize,
    pub pool_stride: usize,
    pub final_conv: ConvParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnEncoder {
    pub history_len: usize,
    pub cell: LstmCell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EncoderParams {
    Gnn(GnnEncoder),
    Cnn(CnnEncoder),
    Rnn(RnnEncoder),
}

fn conv_from(store: &mut ParamStore<impl Scalar>, l: &LayerPlan, rng: &mut (impl Rng + ?Sized)) -> ConvParams {
    ConvParams::new(
        store,
        &format!("enc.{}", l.name),
        l.in_channels,
        l.out_channels,
        l.filter_size,
        l.stride,
        rng,
    )
}

impl EncoderParams {
    /// Allocates and initializes the weights of the planned architecture.
    pub fn build<F: Scalar, R: Rng + ?Sized>(cfg: &EncoderConfig, store: &mut ParamStore<F>, rng: &mut R) -> Result<Self> {
        let plan = resolve_shapes(cfg)?;
        Ok(match cfg.kind {
            EncoderKind::Gnn => {
                let g = plan.graph.expect("GNN plan has a graph stage");
                let annotation = conv_from(store, &plan.layers[0], rng);
                let hidden = conv_from(store, &plan.layers[1], rng);
                let ggnn = GgnnParams::new(
                    store,
                    "enc.ggnn",
                    g.hidden,
                    g.annotation_dim,
                    g.node_output_dim,
                    cfg.gnn.propagation_steps,
                    rng,
                );
                let trailing = plan.layers[2..].iter().map(|l| conv_from(store, l, rng)).collect();
                EncoderParams::Gnn(GnnEncoder {
                    annotation,
                    hidden,
                    ggnn,
                    trailing,
                    history_len: cfg.history_len,
                    pad_len: cfg.gnn.pad_len,
                })
            }
            EncoderKind::Cnn => {
                let n = cfg.cnn.convs.len();
                let convs = plan.layers[..n].iter().map(|l| conv_from(store, l, rng)).collect();
                let final_conv = conv_from(store, &plan.layers[n + 1], rng);
                EncoderParams::Cnn(CnnEncoder {
                    history_len: cfg.history_len,
                    convs,
                    pool_size: cfg.cnn.pool_size,
                    pool_stride: cfg.cnn.pool_stride,
                    final_conv,
                })
            }
            EncoderKind::Rnn => EncoderParams::Rnn(RnnEncoder {
                history_len: cfg.history_len,
                cell: LstmCell::new(
                    store,
                    "enc.lstm",
                    cfg.clusters,
                    cfg.rnn.hidden,
                    Some(cfg.rnn.embed_dim),
                    None,
                    rng,
                ),
            }),
        })
    }

    pub fn kind(&self) -> EncoderKind {
        match self {
            EncoderParams::Gnn(_) => EncoderKind::Gnn,
            EncoderParams::Cnn(_) => EncoderKind::Cnn,
            EncoderParams::Rnn(_) => EncoderKind::Rnn,
        }
    }

    /// Encodes `input` into a `[1 × output_dim]` code.
    pub fn encode<F: Scalar>(&self, s: &mut Session<'_, F>, input: &[ClusterVector], graph: &ProximityGraph) -> Result<Var> {
        match self {
            EncoderParams::Gnn(e) => {
                let history = NodeHistory::from_vectors(input, e.pad_len)?;
                gnn_encode(s, &history, graph, e)
            }
            EncoderParams::Cnn(e) => cnn_encode(s, input, e),
            EncoderParams::Rnn(e) => rnn_encode(s, input, e),
        }
    }
}

fn check_len(got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return shape_err(format!("history of {got} steps, encoder expects {expected}"));
    }
    Ok(())
}

fn flatten_row<F: Scalar>(s: &mut Session<'_, F>, v: Var) -> Result<Var> {
    let n = s.tape.value(v).len();
    s.tape.reshape(v, &[1, n])
}

pub fn gnn_encode<F: Scalar>(
    s: &mut Session<'_, F>,
    history: &NodeHistory,
    graph: &ProximityGraph,
    e: &GnnEncoder,
) -> Result<Var> {
    let k = history.clusters;
    check_len(history.history_len, e.history_len)?;
    if graph.nodes != k {
        return shape_err(format!("graph has {} nodes for {k} clusters", graph.nodes));
    }
    let a = s.constant(Tensor::from_f64(&[k, 1, history.history_len], &history.a)?)?;
    let h = s.constant(Tensor::from_f64(&[k, 1, history.pad_len], &history.h)?)?;

    let a1 = conv1d_gated(s, a, &e.annotation)?;
    let a1 = s.tape.reshape(a1, &[k, e.ggnn.annotation_dim])?;
    let h1 = conv1d_gated(s, h, &e.hidden)?;
    let h1 = s.tape.reshape(h1, &[k, e.ggnn.hidden])?;

    let hi = ggnn_propagate(s, h1, graph, &e.ggnn)?;
    let out = ggnn_output(s, hi, a1, &e.ggnn)?;

    let mut x = s.tape.reshape(out, &[1, 1, k * e.ggnn.output_dim])?;
    for conv in &e.trailing {
        x = conv1d_gated(s, x, conv)?;
    }
    flatten_row(s, x)
}

pub fn cnn_encode<F: Scalar>(s: &mut Session<'_, F>, input: &[ClusterVector], e: &CnnEncoder) -> Result<Var> {
    let m = input.len();
    check_len(m, e.history_len)?;
    let k = input.first().map_or(0, |v| v.values.len());
    let mut data = vec![F::zero(); k * m];
    for (t, v) in input.iter().enumerate() {
        if v.values.len() != k {
            return shape_err(format!("step {t} has {} clusters, expected {k}", v.values.len()));
        }
        for (c, &x) in v.values.iter().enumerate() {
            data[c * m + t] = F::of(x);
        }
    }
    let mut x = s.constant(Tensor::new(&[1, k, m], data)?)?;
    for conv in &e.convs {
        x = conv1d_gated(s, x, conv)?;
    }
    x = s.tape.max_pool1d(x, e.pool_size, e.pool_stride)?;
    x = conv1d_gated(s, x, &e.final_conv)?;
    flatten_row(s, x)
}

pub fn rnn_encode<F: Scalar>(s: &mut Session<'_, F>, input: &[ClusterVector], e: &RnnEncoder) -> Result<Var> {
    check_len(input.len(), e.history_len)?;
    let zeros = Tensor::row(vec![F::zero(); e.cell.hidden]);
    let mut h = s.constant(zeros.clone())?;
    let mut c = s.constant(zeros)?;
    for v in input {
        let x = s.constant(Tensor::row(v.values.iter().map(|&x| F::of(x)).collect()))?;
        (h, c) = lstm_cell_step(s, &e.cell, h, c, x, None)?;
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn series(m: usize, k: usize) -> Vec<ClusterVector> {
        (0..m)
            .map(|t| ClusterVector {
                step_index: t as i64,
                values: (0..k).map(|c| ((t * 7 + c * 3) % 11) as f64 / 10.0).collect(),
            })
            .collect()
    }

    #[test]
    fn default_gnn_code_has_forty_entries() {
        let cfg = EncoderConfig::new(EncoderKind::Gnn, 48, 27);
        let mut store = ParamStore::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc = EncoderParams::build(&cfg, &mut store, &mut rng).unwrap();
        let g = ProximityGraph::new(27, [(0, 1), (1, 2), (5, 9)]).unwrap();
        let input = series(48, 27);
        let mut s = Session::new(&store);
        let code = enc.encode(&mut s, &input, &g).unwrap();
        assert_eq!(s.value(code).shape(), &[1, 40]);
        let first = s.value(code).clone();
        let mut s2 = Session::new(&store);
        let again = enc.encode(&mut s2, &input, &g).unwrap();
        assert_eq!(s2.value(again), &first);
    }

    #[test]
    fn zero_weight_cnn_emits_bias_image() {
        let cfg = EncoderConfig::new(EncoderKind::Cnn, 48, 5);
        let mut store = ParamStore::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc = EncoderParams::build(&cfg, &mut store, &mut rng).unwrap();
        let EncoderParams::Cnn(ref cnn) = enc else { unreachable!() };
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let n = store.get(id).len();
            store.set_data(id, &vec![0.0; n]).unwrap();
        }
        store.set_data(cnn.final_conv.b_f, &vec![0.8; 50]).unwrap();
        store.set_data(cnn.final_conv.b_g, &vec![-0.4; 50]).unwrap();
        let input: Vec<ClusterVector> = (0..48)
            .map(|t| ClusterVector {
                step_index: t,
                values: vec![0.5; 5],
            })
            .collect();
        let mut s = Session::new(&store);
        let code = enc.encode(&mut s, &input, &ProximityGraph::empty(5)).unwrap();
        let expected = 0.8 * (-0.4f64).sigmoid();
        assert!(s.value(code).data().iter().all(|&v| (v - expected).abs() < 1e-15));
    }

    #[test]
    fn zero_weight_rnn_has_zero_code() {
        let cfg = EncoderConfig::new(EncoderKind::Rnn, 6, 4);
        let mut store = ParamStore::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc = EncoderParams::build(&cfg, &mut store, &mut rng).unwrap();
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let n = store.get(id).len();
            store.set_data(id, &vec![0.0; n]).unwrap();
        }
        let mut s = Session::new(&store);
        let code = enc.encode(&mut s, &series(6, 4), &ProximityGraph::empty(4)).unwrap();
        assert!(s.value(code).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn history_padding_is_zero() {
        let h = NodeHistory::from_vectors(&series(4, 2), 6).unwrap();
        for node in 0..2 {
            assert_eq!(&h.h[node * 6..node * 6 + 4], &h.a[node * 4..node * 4 + 4]);
            assert_eq!(&h.h[node * 6 + 4..node * 6 + 6], &[0.0, 0.0]);
        }
        assert!(NodeHistory::from_vectors(&series(4, 2), 3).is_err());
    }
}
