//! Reverse-mode differentiation over dense tensors.
//!
//! A [`Tape`] records every operation of a forward pass as a node holding
//! its value and the operands it was computed from. [`Tape::backward`]
//! walks the record in reverse and accumulates adjoints. Parameters are
//! owned by a [`ParamStore`] and bound onto a tape through a [`Session`],
//! so one set of weights can be evaluated on many independent tapes.

mod params;
mod tape;
mod tensor;

pub use params::{ParamId, ParamStore, Session};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
