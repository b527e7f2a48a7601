//! Parking availability forecasting with a graph encoder and an LSTM decoder.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what data, training and
//! checkpoints use.

pub mod autodiff;
pub mod checkpoint;
pub mod data;
pub mod dataset;
pub mod decoder;
pub mod encoders;
pub mod error;
pub mod model;
pub mod nn;
pub mod preprocess;
pub mod scalar;
pub mod training;

pub use checkpoint::Checkpoint;
pub use dataset::Dataset;
pub use encoders::{EncoderConfig, EncoderKind};
pub use error::{Error, Result};
pub use model::ModelConfig;
pub use scalar::Scalar;
pub use training::{EvalReport, Forecaster, TrainConfig};

pub type Tensor = autodiff::Tensor<f64>;
pub type Tape = autodiff::Tape<f64>;
pub type ParamStore = autodiff::ParamStore<f64>;
pub type Session<'p> = autodiff::Session<'p, f64>;
pub type Model = model::Seq2Seq<f64>;
