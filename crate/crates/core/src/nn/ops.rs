use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::nn::Matrix;

/// Probability floor applied inside logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Numerically stable softmax of one row (max subtraction).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&x| math::exp(x - max)).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = math::exp(*v - max);
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}

pub fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for r in 0..out.rows() {
        softmax_in_place(out.row_mut(r));
    }
    out
}

fn check_distribution(name: &str, p: &[f64]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-6 || p.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::Contract(alloc::format!("{name} is not a probability vector (sum {sum})")));
    }
    Ok(())
}

/// `−Σ target_i · log(max(predicted_i, 1e-12))`.
pub fn cross_entropy(target: &[f64], predicted: &[f64]) -> Result<f64> {
    if target.len() != predicted.len() {
        return Err(Error::Shape(alloc::format!("cross-entropy {} vs {}", target.len(), predicted.len())));
    }
    check_distribution("target", target)?;
    check_distribution("prediction", predicted)?;
    Ok(target
        .iter()
        .zip(predicted)
        .filter(|(&m, _)| m > 0.0)
        .map(|(&m, &p)| -m * math::ln(p.max(PROB_FLOOR)))
        .sum())
}

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * math::ln(v)).sum()
}

#[inline]
pub(crate) fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}
