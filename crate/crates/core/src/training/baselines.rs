//! Least-squares autoregression and seasonal-naive forecasts.
//!
//! These stand in for ARIMA and SARIMA: no differencing, no moving-average
//! terms, no Box-Jenkins order selection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `x_t = intercept + Σ_i coeffs[i] x_{t-1-i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    pub coeffs: Vec<f64>,
    pub intercept: f64,
}

impl ArModel {
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// One-step prediction from the most recent `order()` values.
    pub fn predict_next(&self, history: &[f64]) -> f64 {
        let n = history.len();
        self.intercept
            + self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c * history[n - 1 - i])
                .sum::<f64>()
    }
}

const RANK_TOL: f64 = 1e-10;

/// Ordinary least squares of `x_t` on its `p` lags and a constant.
///
/// Solved on centered data so a constant series gets zero coefficients
/// and the constant as intercept. A rank-deficient design that cannot fit
/// the data exactly is reported as singular.
pub fn ar_fit(series: &[f64], p: usize) -> Result<ArModel> {
    if p == 0 {
        return Err(Error::Config("lag order must be positive".into()));
    }
    if series.len() <= p + 1 {
        return Err(Error::Config(format!(
            "series of length {} is too short for lag order {p}",
            series.len()
        )));
    }
    let rows = series.len() - p;
    let x = DMatrix::from_fn(rows, p, |r, i| series[r + p - 1 - i]);
    let y = DVector::from_fn(rows, |r, _| series[r + p]);
    let x_mean: Vec<f64> = (0..p).map(|i| x.column(i).mean()).collect();
    let y_mean = y.mean();
    let xc = DMatrix::from_fn(rows, p, |r, i| x[(r, i)] - x_mean[i]);
    let yc = y.map(|v| v - y_mean);

    let svd = xc.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = RANK_TOL * smax.max(1.0) * rows as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let beta = svd
        .solve(&yc, tol)
        .map_err(|_| Error::SingularDesign { order: p })?;
    if rank < p {
        let resid = (&yc - &xc * &beta).norm();
        if resid > 1e-9 * (1.0 + yc.norm()) {
            return Err(Error::SingularDesign { order: p });
        }
    }
    let coeffs: Vec<f64> = beta.iter().copied().collect();
    let intercept = y_mean - coeffs.iter().zip(&x_mean).map(|(c, m)| c * m).sum::<f64>();
    Ok(ArModel { coeffs, intercept })
}

/// Iterated forecast, feeding each prediction back as a lag.
pub fn ar_forecast(model: &ArModel, history: &[f64], steps: usize) -> Result<Vec<f64>> {
    if history.len() < model.order() {
        return Err(Error::Config(format!(
            "history of {} values is shorter than lag order {}",
            history.len(),
            model.order()
        )));
    }
    let mut buf: Vec<f64> = history[history.len() - model.order()..].to_vec();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let next = model.predict_next(&buf);
        out.push(next);
        buf.remove(0);
        buf.push(next);
    }
    Ok(out)
}

/// Repeats the last observed period: step `j` gets `series[n - period + j mod period]`.
pub fn seasonal_naive(series: &[f64], period: usize, steps: usize) -> Result<Vec<f64>> {
    if period == 0 || series.len() < period {
        return Err(Error::Config(format!(
            "history of {} values is shorter than period {period}",
            series.len()
        )));
    }
    let base = series.len() - period;
    Ok((0..steps).map(|j| series[base + j % period]).collect())
}
