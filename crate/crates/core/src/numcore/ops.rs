//! Differentiable primitives and their backward maps.
//!
//! Each `*_backward` takes the forward result (or cached inputs) together
//! with the cotangent of the output and returns the cotangents of the
//! inputs.

use super::mat::{ordered_sum, Axis, Mat};
use crate::error::{Error, Result};

/// Numerically stable softmax. The normaliser is an [`ordered_sum`], so the
/// output is permutation-equivariant bit for bit.
pub fn softmax_vec(g: &[f64]) -> Result<Vec<f64>> {
    if g.is_empty() {
        return Err(Error::Contract("softmax of an empty vector".into()));
    }
    let max = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = g.iter().map(|v| (v - max).exp()).collect();
    let total = ordered_sum(&exps);
    Ok(exps.iter().map(|e| e / total).collect())
}

/// Given `s = softmax(g)` and `ds`, returns `dg = s * (ds - <s, ds>)`.
pub fn softmax_backward(s: &[f64], ds: &[f64]) -> Vec<f64> {
    let inner = super::mat::dot(s, ds);
    s.iter().zip(ds).map(|(si, di)| si * (di - inner)).collect()
}

/// `dx` for `y = tanh(x)`, written in terms of `y`.
pub fn tanh_backward(y: f64, dy: f64) -> f64 {
    dy * (1.0 - y * y)
}

/// `dx` for `y = sigmoid(x)`, written in terms of `y`.
pub fn sigmoid_backward(y: f64, dy: f64) -> f64 {
    dy * y * (1.0 - y)
}

/// Cotangents of `c = a * b`: `(dc b^T, a^T dc)`.
pub fn matmul_backward(a: &Mat, b: &Mat, dc: &Mat) -> Result<(Mat, Mat)> {
    let da = dc.matmul(&b.transpose())?;
    let db = a.transpose().matmul(dc)?;
    Ok((da, db))
}

/// Routes the cotangent of an [`Mat::axis_max`] back to the argmax
/// positions. `argmax` must come from [`Mat::axis_argmax`] on the same axis.
pub fn axis_max_backward(
    shape: (usize, usize),
    axis: Axis,
    argmax: &[usize],
    dy: &[f64],
) -> Mat {
    let mut dx = Mat::zeros(shape.0, shape.1);
    match axis {
        Axis::Rows => {
            for (i, (&j, d)) in argmax.iter().zip(dy).enumerate() {
                dx[(i, j)] += d;
            }
        }
        Axis::Cols => {
            for (j, (&i, d)) in argmax.iter().zip(dy).enumerate() {
                dx[(i, j)] += d;
            }
        }
    }
    dx
}
