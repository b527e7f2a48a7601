//! Differentiable layers built on the tape: gated 1-D convolution, gated
//! graph propagation and its output head, LSTM cells with ReLU input
//! embeddings, and inverted dropout.

mod conv;
mod dropout;
mod ggnn;
mod lstm;

pub use conv::{conv1d_gated, ConvParams, Stride};
pub use dropout::{dropout, Mode};
pub use ggnn::{ggnn_output, ggnn_propagate, GgnnParams};
pub use lstm::{lstm_cell_step, lstm_step, Dense, LstmCell};
