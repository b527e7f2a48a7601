use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamStore, Session, Tensor, Var};
use crate::error::{shape_err, Result};
use crate::preprocess::ProximityGraph;
use crate::scalar::Scalar;

/// Gated graph neural network weights.
///
/// Node states are rows of a `[K × hidden]` matrix. Messages use one
/// linear map shared by all neighbors; the GRU-style gates have no biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GgnnParams {
    pub hidden: usize,
    pub annotation_dim: usize,
    pub output_dim: usize,
    pub steps: usize,
    pub w_msg: ParamId,
    pub b_msg: ParamId,
    pub w_r: ParamId,
    pub u_r: ParamId,
    pub w_z: ParamId,
    pub u_z: ParamId,
    pub w_h: ParamId,
    pub u_h: ParamId,
    pub w_o: ParamId,
    pub b_o: ParamId,
}

impl GgnnParams {
    pub fn new<F: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        hidden: usize,
        annotation_dim: usize,
        output_dim: usize,
        steps: usize,
        rng: &mut R,
    ) -> Self {
        let hh = [hidden, hidden];
        let mut sq = |n: &str, rng: &mut R| store.weight(&format!("{name}.{n}"), &hh, hidden, rng);
        let w_msg = sq("w_msg", rng);
        let w_r = sq("w_r", rng);
        let u_r = sq("u_r", rng);
        let w_z = sq("w_z", rng);
        let u_z = sq("u_z", rng);
        let w_h = sq("w_h", rng);
        let u_h = sq("u_h", rng);
        let b_msg = store.bias(&format!("{name}.b_msg"), &[hidden]);
        let fan = hidden + annotation_dim;
        let w_o = store.weight(&format!("{name}.w_o"), &[fan, output_dim], fan, rng);
        let b_o = store.bias(&format!("{name}.b_o"), &[output_dim]);
        Self {
            hidden,
            annotation_dim,
            output_dim,
            steps,
            w_msg,
            b_msg,
            w_r,
            u_r,
            w_z,
            u_z,
            w_h,
            u_h,
            w_o,
            b_o,
        }
    }
}

/// Runs `p.steps` rounds of neighbor aggregation and gated update:
///
/// ```text
/// m = A (h W_msg + b_msg)
/// r = σ(m W_r + h U_r)
/// z = σ(m W_z + h U_z)
/// ĥ = tanh(m W_h + (h ⊙ r) U_h)
/// h ← (1 − z) ⊙ h + z ⊙ ĥ
/// ```
///
/// where `A` is the 0/1 adjacency, so isolated nodes receive a zero message.
pub fn ggnn_propagate<F: Scalar>(
    s: &mut Session<'_, F>,
    h0: Var,
    graph: &ProximityGraph,
    p: &GgnnParams,
) -> Result<Var> {
    match *s.tape.shape(h0) {
        [k, h] if k == graph.nodes && h == p.hidden => {}
        [k, h] => {
            return shape_err(format!(
                "GGNN state [{k} x {h}] against {} nodes and hidden size {}",
                graph.nodes, p.hidden
            ))
        }
        ref other => return shape_err(format!("GGNN state must be rank 2, got {other:?}")),
    }
    if p.steps == 0 {
        return Ok(h0);
    }
    let adj: Vec<F> = graph.adjacency().into_iter().map(F::of).collect();
    let adj = s.constant(Tensor::new(&[graph.nodes, graph.nodes], adj)?)?;
    let w_msg = s.param(p.w_msg)?;
    let b_msg = s.param(p.b_msg)?;
    let (w_r, u_r) = (s.param(p.w_r)?, s.param(p.u_r)?);
    let (w_z, u_z) = (s.param(p.w_z)?, s.param(p.u_z)?);
    let (w_h, u_h) = (s.param(p.w_h)?, s.param(p.u_h)?);

    let t = &mut s.tape;
    let mut h = h0;
    for _ in 0..p.steps {
        let lin = t.matmul(h, w_msg)?;
        let lin = t.add_bias(lin, b_msg)?;
        let m = t.matmul(adj, lin)?;

        let mr = t.matmul(m, w_r)?;
        let hr = t.matmul(h, u_r)?;
        let r = t.add(mr, hr)?;
        let r = t.sigmoid(r)?;

        let mz = t.matmul(m, w_z)?;
        let hz = t.matmul(h, u_z)?;
        let z = t.add(mz, hz)?;
        let z = t.sigmoid(z)?;

        let mh = t.matmul(m, w_h)?;
        let hr = t.mul(h, r)?;
        let hu = t.matmul(hr, u_h)?;
        let cand = t.add(mh, hu)?;
        let cand = t.tanh(cand)?;

        let keep = t.one_minus(z)?;
        let kept = t.mul(keep, h)?;
        let upd = t.mul(z, cand)?;
        h = t.add(kept, upd)?;
    }
    Ok(h)
}

/// `tanh([h ; a] W_O + b_O)` per node.
pub fn ggnn_output<F: Scalar>(s: &mut Session<'_, F>, h: Var, a: Var, p: &GgnnParams) -> Result<Var> {
    let (hs, as_) = (s.tape.shape(h).to_vec(), s.tape.shape(a).to_vec());
    if hs.len() != 2 || as_.len() != 2 || hs[0] != as_[0] {
        return shape_err(format!("GGNN output needs matching node counts, got {hs:?} and {as_:?}"));
    }
    if hs[1] + as_[1] != p.hidden + p.annotation_dim {
        return shape_err(format!(
            "GGNN output weights expect {} + {} columns, got {} + {}",
            p.hidden, p.annotation_dim, hs[1], as_[1]
        ));
    }
    let w_o = s.param(p.w_o)?;
    let b_o = s.param(p.b_o)?;
    let cat = s.tape.concat_cols(&[h, a])?;
    let lin = s.tape.matmul(cat, w_o)?;
    let lin = s.tape.add_bias(lin, b_o)?;
    s.tape.tanh(lin)
}
