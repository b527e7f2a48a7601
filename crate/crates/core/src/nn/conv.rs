use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamStore, Session, Var};
use crate::error::{shape_err, Result};
use crate::scalar::Scalar;

/// Convolution stride; `FullSpan` makes the filter cover the whole input,
/// producing a single output position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stride {
    Step(usize),
    FullSpan,
}

/// Gated convolution: a linear path and a sigmoid gate path with the
/// same geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvParams {
    pub in_channels: usize,
    pub n_filters: usize,
    /// Realized filter width; for `FullSpan` this equals the input length.
    pub filter_size: usize,
    pub stride: Stride,
    pub w_f: ParamId,
    pub b_f: ParamId,
    pub w_g: ParamId,
    pub b_g: ParamId,
}

impl ConvParams {
    pub fn new<F: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        in_channels: usize,
        n_filters: usize,
        filter_size: usize,
        stride: Stride,
        rng: &mut R,
    ) -> Self {
        let shape = [n_filters, in_channels, filter_size];
        let fan_in = in_channels * filter_size;
        let w_f = store.weight(&format!("{name}.w_f"), &shape, fan_in, rng);
        let b_f = store.bias(&format!("{name}.b_f"), &[n_filters]);
        let w_g = store.weight(&format!("{name}.w_g"), &shape, fan_in, rng);
        let b_g = store.bias(&format!("{name}.b_g"), &[n_filters]);
        Self {
            in_channels,
            n_filters,
            filter_size,
            stride,
            w_f,
            b_f,
            w_g,
            b_g,
        }
    }

    pub fn output_len(&self, len: usize) -> Result<usize> {
        match self.stride {
            Stride::FullSpan if len == self.filter_size => Ok(1),
            Stride::FullSpan => shape_err(format!(
                "full-span filter of size {} applied to input length {len}",
                self.filter_size
            )),
            Stride::Step(0) => shape_err("stride must be at least 1"),
            Stride::Step(_) if len < self.filter_size => shape_err(format!(
                "input length {len} is shorter than filter size {}",
                self.filter_size
            )),
            Stride::Step(s) => Ok((len - self.filter_size) / s + 1),
        }
    }

    fn step(&self) -> usize {
        match self.stride {
            Stride::Step(s) => s,
            Stride::FullSpan => 1,
        }
    }
}

/// `(x ∗ w_f + b_f) ⊙ σ(x ∗ w_g + b_g)` with valid padding.
///
/// `x` is `[C × L]` or `[B × C × L]`; the output keeps the same rank.
pub fn conv1d_gated<F: Scalar>(s: &mut Session<'_, F>, x: Var, p: &ConvParams) -> Result<Var> {
    let shape = s.tape.shape(x).to_vec();
    let (batched, c, l) = match shape[..] {
        [c, l] => (false, c, l),
        [_, c, l] => (true, c, l),
        _ => return shape_err(format!("gated conv input must be [C x L] or [B x C x L], got {shape:?}")),
    };
    if c != p.in_channels {
        return shape_err(format!(
            "gated conv expects {} input channels, got {c}",
            p.in_channels
        ));
    }
    p.output_len(l)?;
    let x3 = if batched { x } else { s.tape.reshape(x, &[1, c, l])? };
    let (w_f, b_f, w_g, b_g) = (s.param(p.w_f)?, s.param(p.b_f)?, s.param(p.w_g)?, s.param(p.b_g)?);
    let lin = s.tape.conv1d(x3, w_f, b_f, p.step())?;
    let gate_pre = s.tape.conv1d(x3, w_g, b_g, p.step())?;
    let gate = s.tape.sigmoid(gate_pre)?;
    let out = s.tape.mul(lin, gate)?;
    if batched {
        Ok(out)
    } else {
        let o = s.tape.shape(out).to_vec();
        s.tape.reshape(out, &[o[1], o[2]])
    }
}
