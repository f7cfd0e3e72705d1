use pebble_autodiff::{Tape, Var};

use crate::Result;

/// Added to the norm before dividing, so the zero vector maps to itself.
pub const NORM_EPS: f64 = 1e-8;
/// Weight of the `(|v|^2 - 1)^2` unit-norm regularizer.
pub const PENALTY_COEF: f64 = 0.02;

pub fn l2_normalize(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / (norm + NORM_EPS)).collect()
}

pub fn unit_norm_penalty(v: &[f64]) -> f64 {
    let sq: f64 = v.iter().map(|x| x * x).sum();
    PENALTY_COEF * (sq - 1.0).powi(2)
}

/// Normalizes every row of `x`.
pub fn l2_normalize_rows(tape: &mut Tape, x: Var) -> Result<Var> {
    Ok(tape.l2_normalize_rows(x)?)
}

/// Per-row penalty as an `[m, 1]` column.
pub fn unit_norm_penalty_rows(tape: &mut Tape, x: Var) -> Result<Var> {
    let sq = tape.mul(x, x)?;
    let sq = tape.sum_rows(sq)?;
    let dev = tape.add_scalar(sq, -1.0)?;
    let dev = tape.mul(dev, dev)?;
    Ok(tape.scale(dev, PENALTY_COEF)?)
}
