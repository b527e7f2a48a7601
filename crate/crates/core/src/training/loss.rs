use rand::Rng;

use crate::autodiff::{Session, Var};
use crate::error::{shape_err, Result};
use crate::scalar::Scalar;

/// Mean absolute error over all steps and clusters, recorded on the tape.
///
/// `pred` and `target` are `[1 × K]` rows per step.
pub fn mae_loss<F: Scalar>(s: &mut Session<'_, F>, pred: &[Var], target: &[Var]) -> Result<Var> {
    if pred.is_empty() || pred.len() != target.len() {
        return shape_err(format!("{} predicted steps against {} targets", pred.len(), target.len()));
    }
    let p = s.tape.concat_cols(pred)?;
    let t = s.tape.concat_cols(target)?;
    let d = s.tape.sub(p, t)?;
    let a = s.tape.abs(d)?;
    s.tape.mean(a)
}

/// Plain mean absolute error of two equally shaped `N × K` matrices.
pub fn mae(pred: &[Vec<f64>], target: &[Vec<f64>]) -> Result<f64> {
    if pred.is_empty() || pred.len() != target.len() {
        return shape_err(format!("{} predicted steps against {} targets", pred.len(), target.len()));
    }
    let mut total = 0.0;
    let mut n = 0usize;
    for (p, t) in pred.iter().zip(target) {
        if p.len() != t.len() {
            return shape_err(format!("row of {} values against {}", p.len(), t.len()));
        }
        total += p.iter().zip(t).map(|(a, b)| (a - b).abs()).sum::<f64>();
        n += p.len();
    }
    if n == 0 {
        return shape_err("empty rows");
    }
    Ok(total / n as f64)
}

/// Uniform horizon in `1..=n_max`.
pub fn sample_horizon<R: Rng + ?Sized>(rng: &mut R, n_max: usize) -> usize {
    rng.random_range(1..=n_max.max(1))
}
