use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Session, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted dropout: in training each element is zeroed with probability
/// `p_drop` and survivors are scaled by `1 / (1 − p_drop)`; evaluation is
/// the identity.
pub fn dropout<F: Scalar, R: Rng + ?Sized>(
    s: &mut Session<'_, F>,
    x: Var,
    p_drop: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<Var> {
    if !(0.0..1.0).contains(&p_drop) {
        return Err(Error::Config(format!("dropout probability {p_drop} outside [0, 1)")));
    }
    if mode == Mode::Eval || p_drop == 0.0 {
        return Ok(x);
    }
    let keep = F::of(1.0 / (1.0 - p_drop));
    let mask = (0..s.tape.value(x).len())
        .map(|_| if rng.random::<f64>() < p_drop { F::zero() } else { keep })
        .collect();
    s.tape.mul_const(x, mask)
}
