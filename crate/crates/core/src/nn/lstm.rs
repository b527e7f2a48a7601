use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamStore, Session, Var};
use crate::error::{shape_err, Result};
use crate::scalar::Scalar;

/// Affine map on row vectors: `x W + b` with `W: [in × out]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: ParamId,
    pub b: ParamId,
}

impl Dense {
    pub fn new<F: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        rng: &mut R,
    ) -> Self {
        let w = store.weight(&format!("{name}.w"), &[in_dim, out_dim], in_dim, rng);
        let b = store.bias(&format!("{name}.b"), &[out_dim]);
        Self { in_dim, out_dim, w, b }
    }

    pub fn apply<F: Scalar>(&self, s: &mut Session<'_, F>, x: Var) -> Result<Var> {
        let w = s.param(self.w)?;
        let b = s.param(self.b)?;
        let y = s.tape.matmul(x, w)?;
        s.tape.add_bias(y, b)
    }
}

/// LSTM cell over row vectors `[1 × n]`.
///
/// The step input may be passed through a ReLU embedding first, and an
/// optional calendar vector gets its own ReLU embedding. Gates read
/// `[h ; input ; calendar]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCell {
    pub input_dim: usize,
    pub hidden: usize,
    pub input_embed: Option<Dense>,
    pub calendar_embed: Option<Dense>,
    pub w_f: ParamId,
    pub b_f: ParamId,
    pub w_i: ParamId,
    pub b_i: ParamId,
    pub w_c: ParamId,
    pub b_c: ParamId,
    pub w_o: ParamId,
    pub b_o: ParamId,
}

impl LstmCell {
    /// `input_embed` / `calendar` give `(in, out)` sizes of the ReLU
    /// embeddings; without `input_embed` the raw input feeds the gates.
    pub fn new<F: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        input_dim: usize,
        hidden: usize,
        input_embed: Option<usize>,
        calendar: Option<(usize, usize)>,
        rng: &mut R,
    ) -> Self {
        let input_embed = input_embed.map(|e| Dense::new(store, &format!("{name}.embed_s"), input_dim, e, rng));
        let calendar_embed = calendar.map(|(d, e)| Dense::new(store, &format!("{name}.embed_d"), d, e, rng));
        let gate_in = hidden
            + input_embed.as_ref().map_or(input_dim, |d| d.out_dim)
            + calendar_embed.as_ref().map_or(0, |d| d.out_dim);
        let mut gate = |g: &str, rng: &mut R| {
            (
                store.weight(&format!("{name}.w_{g}"), &[gate_in, hidden], gate_in, rng),
                store.bias(&format!("{name}.b_{g}"), &[hidden]),
            )
        };
        let (w_f, b_f) = gate("f", rng);
        let (w_i, b_i) = gate("i", rng);
        let (w_c, b_c) = gate("c", rng);
        let (w_o, b_o) = gate("o", rng);
        Self {
            input_dim,
            hidden,
            input_embed,
            calendar_embed,
            w_f,
            b_f,
            w_i,
            b_i,
            w_c,
            b_c,
            w_o,
            b_o,
        }
    }
}

/// One cell update; returns `(h', C')`.
pub fn lstm_cell_step<F: Scalar>(
    s: &mut Session<'_, F>,
    cell: &LstmCell,
    h: Var,
    c: Var,
    x: Var,
    calendar: Option<Var>,
) -> Result<(Var, Var)> {
    let row = |s: &Session<'_, F>, v: Var, n: usize, what: &str| -> Result<()> {
        if s.tape.shape(v) != [1, n] {
            return shape_err(format!("LSTM {what} must be [1 x {n}], got {:?}", s.tape.shape(v)));
        }
        Ok(())
    };
    row(s, h, cell.hidden, "hidden state")?;
    row(s, c, cell.hidden, "cell state")?;
    row(s, x, cell.input_dim, "input")?;

    let mut parts = vec![h];
    match &cell.input_embed {
        Some(e) => {
            let pre = e.apply(s, x)?;
            parts.push(s.tape.relu(pre)?);
        }
        None => parts.push(x),
    }
    match (&cell.calendar_embed, calendar) {
        (Some(e), Some(d)) => {
            row(s, d, e.in_dim, "calendar")?;
            let pre = e.apply(s, d)?;
            parts.push(s.tape.relu(pre)?);
        }
        (None, None) => {}
        (Some(_), None) => return shape_err("LSTM cell expects a calendar input"),
        (None, Some(_)) => return shape_err("LSTM cell has no calendar embedding"),
    }
    let z = s.tape.concat_cols(&parts)?;

    let mut gate = |w: ParamId, b: ParamId| -> Result<Var> {
        let w = s.param(w)?;
        let b = s.param(b)?;
        let y = s.tape.matmul(z, w)?;
        s.tape.add_bias(y, b)
    };
    let f = gate(cell.w_f, cell.b_f)?;
    let i = gate(cell.w_i, cell.b_i)?;
    let cand = gate(cell.w_c, cell.b_c)?;
    let o = gate(cell.w_o, cell.b_o)?;

    let t = &mut s.tape;
    let f = t.sigmoid(f)?;
    let i = t.sigmoid(i)?;
    let cand = t.tanh(cand)?;
    let o = t.sigmoid(o)?;
    let kept = t.mul(f, c)?;
    let added = t.mul(i, cand)?;
    let c_next = t.add(kept, added)?;
    let squashed = t.tanh(c_next)?;
    let h_next = t.mul(o, squashed)?;
    Ok((h_next, c_next))
}

/// Decoder step: cell update followed by `σ(C' W + b)` over clusters.
///
/// Returns `(h', C', s_next)`.
pub fn lstm_step<F: Scalar>(
    s: &mut Session<'_, F>,
    cell: &LstmCell,
    head: &Dense,
    h: Var,
    c: Var,
    input: Var,
    calendar: Var,
) -> Result<(Var, Var, Var)> {
    let (h2, c2) = lstm_cell_step(s, cell, h, c, input, Some(calendar))?;
    let logits = head.apply(s, c2)?;
    let out = s.tape.sigmoid(logits)?;
    Ok((h2, c2, out))
}
