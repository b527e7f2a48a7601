//! Loss, optimization, evaluation and baselines.

mod baselines;
mod eval;
mod history;
mod loss;
mod optim;
mod train;

pub use baselines::{ar_fit, ar_forecast, seasonal_naive, ArModel};
pub use eval::{evaluate, ArBaseline, EvalReport, Forecaster, SeasonalNaive, EVAL_HORIZONS};
pub use history::{EpochRecord, History};
pub(crate) use history::hex;
pub use loss::{mae, mae_loss, sample_horizon};
pub use optim::{clip_global_norm, global_norm, Adam, AdamConfig};
pub use train::{batch_gradients, train, validation_mae, PassOptions, TrainConfig, TrainOutcome};
