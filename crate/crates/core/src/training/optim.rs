use serde::{Deserialize, Serialize};

use crate::autodiff::ParamStore;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: Some(5.0),
        }
    }
}

/// Adam with bias correction and optional global-norm clipping.
#[derive(Debug, Clone)]
pub struct Adam<F> {
    pub config: AdamConfig,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
    t: i32,
}

/// Euclidean norm of all gradient entries.
pub fn global_norm<F: Scalar>(grads: &[Vec<F>]) -> f64 {
    grads
        .iter()
        .flatten()
        .map(|g| {
            let g = g.to_f64_lossy();
            g * g
        })
        .sum::<f64>()
        .sqrt()
}

/// Scales `grads` in place so their global norm is at most `max_norm`.
/// Returns the norm before scaling.
pub fn clip_global_norm<F: Scalar>(grads: &mut [Vec<F>], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm {
        let k = F::of(max_norm / norm);
        grads.iter_mut().flatten().for_each(|g| *g = *g * k);
    }
    norm
}

impl<F: Scalar> Adam<F> {
    pub fn new(config: AdamConfig, store: &ParamStore<F>) -> Self {
        let zeros: Vec<Vec<F>> = store.iter().map(|(_, t)| vec![F::zero(); t.len()]).collect();
        Self {
            config,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// Clips and applies one update. Returns the pre-clip gradient norm.
    pub fn step(&mut self, store: &mut ParamStore<F>, mut grads: Vec<Vec<F>>) -> f64 {
        let norm = match self.config.clip_norm {
            Some(c) => clip_global_norm(&mut grads, c),
            None => global_norm(&grads),
        };
        self.t += 1;
        let c = &self.config;
        let (b1, b2) = (F::of(c.beta1), F::of(c.beta2));
        let one = F::one();
        let bc1 = F::of(1.0 - c.beta1.powi(self.t));
        let bc2 = F::of(1.0 - c.beta2.powi(self.t));
        let lr = F::of(c.learning_rate);
        let eps = F::of(c.eps);
        let ids: Vec<_> = store.ids().collect();
        for (i, id) in ids.into_iter().enumerate() {
            let data = store.get_mut(id).data_mut();
            for (j, g) in grads[i].iter().enumerate() {
                let m = b1 * self.m[i][j] + (one - b1) * *g;
                let v = b2 * self.v[i][j] + (one - b2) * *g * *g;
                self.m[i][j] = m;
                self.v[i][j] = v;
                data[j] = data[j] - lr * (m / bc1) / ((v / bc2).sqrt() + eps);
            }
        }
        norm
    }
}
