//! Scoring heads: max-over-time pooling with `tanh`, attentive pooling,
//! and cosine similarity.

mod attention;

pub use attention::{
    attention_backward, attention_forward, attention_pool, soft_alignment, weighted_columns,
    AttentionCache, AttentionParams, AttentionTrace,
};

use crate::error::{Error, Result};
use crate::numcore::{dot, tanh_backward, Axis, Mat};

/// `r[j] = tanh(max_t m[j, t])`.
pub fn maxpool_tanh(m: &Mat) -> Vec<f64> {
    maxpool_tanh_forward(m).0
}

/// Returns the pooled vector and the argmax column of each row.
pub fn maxpool_tanh_forward(m: &Mat) -> (Vec<f64>, Vec<usize>) {
    let argmax = m.axis_argmax(Axis::Rows);
    let r = argmax
        .iter()
        .enumerate()
        .map(|(j, &t)| m[(j, t)].tanh())
        .collect();
    (r, argmax)
}

pub fn maxpool_tanh_backward(shape: (usize, usize), r: &[f64], argmax: &[usize], dr: &[f64]) -> Mat {
    let mut dm = Mat::zeros(shape.0, shape.1);
    for (j, (&t, (rj, dj))) in argmax.iter().zip(r.iter().zip(dr)).enumerate() {
        dm[(j, t)] += tanh_backward(*rj, *dj);
    }
    dm
}

/// Cosine similarity, clamped to `[-1, 1]`. A zero vector is a scoring
/// error rather than a silent zero.
pub fn cosine_score(r_q: &[f64], r_a: &[f64]) -> Result<f64> {
    if r_q.len() != r_a.len() {
        return Err(Error::Contract(format!(
            "cosine of vectors with lengths {} and {}",
            r_q.len(),
            r_a.len()
        )));
    }
    let nq = dot(r_q, r_q).sqrt();
    let na = dot(r_a, r_a).sqrt();
    if nq == 0.0 || na == 0.0 {
        return Err(Error::Scoring("zero-norm representation".into()));
    }
    Ok((dot(r_q, r_a) / (nq * na)).clamp(-1.0, 1.0))
}

/// Cotangents of `s = cos(u, v)`:
/// `ds/du = v / (|u||v|) - s u / |u|^2`, symmetrically for `v`.
pub fn cosine_backward(u: &[f64], v: &[f64], ds: f64) -> (Vec<f64>, Vec<f64>) {
    let nu2 = dot(u, u);
    let nv2 = dot(v, v);
    let denom = (nu2 * nv2).sqrt();
    let s = dot(u, v) / denom;
    let du = u
        .iter()
        .zip(v)
        .map(|(ui, vi)| ds * (vi / denom - s * ui / nu2))
        .collect();
    let dv = u
        .iter()
        .zip(v)
        .map(|(ui, vi)| ds * (ui / denom - s * vi / nv2))
        .collect();
    (du, dv)
}
