use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Session, Tensor};
use crate::decoder::Teacher;
use crate::error::{Error, Result};
use crate::model::Seq2Seq;
use crate::nn::Mode;
use crate::preprocess::{Window, WindowSet};
use crate::scalar::Scalar;
use crate::training::eval::EVAL_HORIZONS;
use crate::training::history::{EpochRecord, History};
use crate::training::loss::{mae_loss, sample_horizon};
use crate::training::optim::{Adam, AdamConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    /// History length `M`; must match the encoder.
    pub history_len: usize,
    /// Largest sampled training horizon.
    pub n_max: usize,
    /// Dropout on the encoder code.
    pub dropout: f64,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub seed: u64,
    pub teacher_forcing_ratio: f64,
    /// Keep every n-th training window.
    pub train_stride: usize,
    /// Keep every n-th validation window.
    pub val_stride: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 512,
            epochs: 50,
            history_len: 48,
            n_max: 8,
            dropout: 0.3,
            learning_rate: 1e-3,
            clip_norm: 5.0,
            seed: 0,
            teacher_forcing_ratio: 1.0,
            train_stride: 1,
            val_stride: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("training config: {m}")));
        if self.batch_size == 0 || self.history_len == 0 || self.n_max == 0 {
            return bad("batch size, history length and horizon must be positive".into());
        }
        if self.train_stride == 0 || self.val_stride == 0 {
            return bad("window strides must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if !(self.clip_norm > 0.0) {
            return bad(format!("clip norm {} must be positive", self.clip_norm));
        }
        if !(0.0..=1.0).contains(&self.teacher_forcing_ratio) {
            return bad(format!("teacher forcing ratio {} outside [0, 1]", self.teacher_forcing_ratio));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            clip_norm: Some(self.clip_norm),
            ..AdamConfig::default()
        }
    }
}

/// Result of [`train`]; the model is left holding the best parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub history: History,
    pub best_epoch: usize,
    pub best_val_mae: f64,
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for `(seed, parts...)`.
pub(crate) fn derived_rng(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    let s = parts.iter().fold(mix(seed), |acc, &p| mix(acc ^ p));
    ChaCha8Rng::seed_from_u64(s)
}

/// Options for one forward/backward pass over a batch.
#[derive(Debug, Clone, Copy)]
pub struct PassOptions {
    pub horizon: usize,
    pub dropout: f64,
    pub teacher_forcing_ratio: f64,
    pub mode: Mode,
    /// Seed of the per-window dropout and teacher-forcing streams.
    pub seed: u64,
}

/// Loss of one window and its gradient per parameter.
fn window_pass<F: Scalar>(model: &Seq2Seq<F>, w: &Window<'_>, opt: &PassOptions, index: u64) -> Result<(f64, Vec<Vec<F>>)> {
    let n = opt.horizon;
    let mut rng = derived_rng(opt.seed, &[index]);
    let active: Vec<bool> = (0..n).map(|j| j > 0 && rng.random::<f64>() < opt.teacher_forcing_ratio).collect();
    let teacher = Teacher {
        targets: &w.target[..n],
        active,
    };
    let mut s = Session::new(&model.store);
    let preds = model.forward(&mut s, w.input, &w.calendar[..n], n, Some(&teacher), opt.dropout, opt.mode, &mut rng)?;
    let targets = w.target[..n]
        .iter()
        .map(|v| s.constant(Tensor::row(v.values.iter().map(|&x| F::of(x)).collect())))
        .collect::<Result<Vec<_>>>()?;
    let loss = mae_loss(&mut s, &preds, &targets)?;
    let value = s.value(loss).data()[0].to_f64_lossy();
    Ok((value, s.backward(loss)?))
}

const CHUNK: usize = 32;

/// Mean loss and mean gradient over `windows`, reduced in window order.
pub fn batch_gradients<F: Scalar>(model: &Seq2Seq<F>, windows: &[Window<'_>], opt: &PassOptions) -> Result<(f64, Vec<Vec<F>>)> {
    if windows.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    if windows.iter().any(|w| w.target.len() < opt.horizon) {
        return Err(Error::Config(format!("windows shorter than horizon {}", opt.horizon)));
    }
    let mut total = 0.0;
    let mut grad: Vec<Vec<F>> = model.store.iter().map(|(_, t)| vec![F::zero(); t.len()]).collect();
    for (c, chunk) in windows.chunks(CHUNK).enumerate() {
        let parts: Vec<(f64, Vec<Vec<F>>)> = chunk
            .par_iter()
            .enumerate()
            .map(|(i, w)| window_pass(model, w, opt, (c * CHUNK + i) as u64))
            .collect::<Result<_>>()?;
        for (l, g) in parts {
            total += l;
            for (acc, gi) in grad.iter_mut().zip(g) {
                acc.iter_mut().zip(gi).for_each(|(a, b)| *a = *a + b);
            }
        }
    }
    let n = windows.len() as f64;
    let inv = F::of(1.0 / n);
    grad.iter_mut().flatten().for_each(|g| *g = *g * inv);
    Ok((total / n, grad))
}

/// Normalized validation MAE averaged over the evaluation horizons that fit
/// the windows, decoding without teacher forcing or dropout.
pub fn validation_mae<F: Scalar>(model: &Seq2Seq<F>, windows: &WindowSet, stride: usize) -> Result<f64> {
    let idx = windows.strided(stride);
    if idx.is_empty() {
        return Err(Error::Config("no validation windows".into()));
    }
    let horizons: Vec<usize> = EVAL_HORIZONS.iter().copied().filter(|&h| h <= windows.horizon()).collect();
    let steps = *horizons.last().ok_or_else(|| Error::Config("validation windows have no horizon".into()))?;
    let per_window: Vec<Vec<f64>> = idx
        .par_iter()
        .map(|&i| {
            let w = windows.get(i);
            let pred = model.predict(w.input, &w.calendar[..steps], steps)?;
            Ok(horizons
                .iter()
                .map(|&h| {
                    let (p, t) = (&pred[h - 1], &w.target[h - 1].values);
                    p.iter().zip(t).map(|(a, b)| (a - b).abs()).sum::<f64>() / t.len() as f64
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut sums = vec![0.0; horizons.len()];
    for row in &per_window {
        sums.iter_mut().zip(row).for_each(|(s, v)| *s += v);
    }
    let n = per_window.len() as f64;
    Ok(sums.iter().map(|s| s / n).sum::<f64>() / horizons.len() as f64)
}

/// Trains with Adam on uniformly sampled horizons, evaluating on the
/// validation windows after every epoch, and restores the parameters of
/// the epoch with the lowest validation MAE (epoch 0 = untrained).
pub fn train<F: Scalar>(model: &mut Seq2Seq<F>, train_windows: &WindowSet, val_windows: &WindowSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cfg.history_len != model.history_len() {
        return Err(Error::Config(format!(
            "training history length {} differs from the encoder's {}",
            cfg.history_len,
            model.history_len()
        )));
    }
    if train_windows.is_empty() || val_windows.is_empty() {
        return Err(Error::Config("training needs non-empty training and validation windows".into()));
    }
    for ws in [train_windows, val_windows] {
        if ws.history() != cfg.history_len || ws.horizon() < cfg.n_max {
            return Err(Error::Config(format!(
                "windows of {} + {} steps do not fit history {} and horizon {}",
                ws.history(),
                ws.horizon(),
                cfg.history_len,
                cfg.n_max
            )));
        }
    }

    let mut adam = Adam::new(cfg.adam(), &model.store);
    let mut history = History::default();
    let val0 = validation_mae(model, val_windows, cfg.val_stride)?;
    log::info!("epoch 0: val {val0:.5}");
    history.records.push(EpochRecord {
        epoch: 0,
        train_mae: None,
        val_mae: val0,
    });
    let mut best = (0, val0, model.store.clone());
    let mut order = train_windows.strided(cfg.train_stride);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut derived_rng(cfg.seed, &[epoch as u64, 0]));
        let mut horizon_rng = derived_rng(cfg.seed, &[epoch as u64, 1]);
        let mut loss_sum = 0.0;
        let batches: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
        for (b, idx) in batches.iter().enumerate() {
            let horizon = sample_horizon(&mut horizon_rng, cfg.n_max);
            let windows: Vec<Window<'_>> = idx.iter().map(|&i| train_windows.get(i)).collect();
            let opt = PassOptions {
                horizon,
                dropout: cfg.dropout,
                teacher_forcing_ratio: cfg.teacher_forcing_ratio,
                mode: Mode::Train,
                seed: derived_rng(cfg.seed, &[epoch as u64, 2, b as u64]).random(),
            };
            let diverged = || Error::NonFiniteLoss {
                epoch,
                batch: b,
                learning_rate: cfg.learning_rate,
            };
            let (loss, grads) = batch_gradients(model, &windows, &opt).map_err(|e| match e {
                Error::NonFinite { .. } => diverged(),
                e => e,
            })?;
            if !loss.is_finite() {
                return Err(diverged());
            }
            let norm = adam.step(&mut model.store, grads);
            if !norm.is_finite() {
                return Err(diverged());
            }
            loss_sum += loss;
        }
        let train_mae = loss_sum / batches.len() as f64;
        let val = validation_mae(model, val_windows, cfg.val_stride)?;
        log::info!("epoch {epoch}: train {train_mae:.5} val {val:.5}");
        history.records.push(EpochRecord {
            epoch,
            train_mae: Some(train_mae),
            val_mae: val,
        });
        if val < best.1 {
            best = (epoch, val, model.store.clone());
        }
    }
    model.store = best.2;
    Ok(TrainOutcome {
        history,
        best_epoch: best.0,
        best_val_mae: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_checks_ranges() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { dropout: 1.0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { teacher_forcing_ratio: 1.5, ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn derived_streams_differ() {
        let a: u64 = derived_rng(1, &[0]).random();
        let b: u64 = derived_rng(1, &[1]).random();
        let c: u64 = derived_rng(1, &[0]).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
