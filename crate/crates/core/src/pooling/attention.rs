use rand::Rng;

use crate::encoders::init_uniform;
use crate::error::{Error, Result};
use crate::numcore::{ordered_sum, softmax_backward, softmax_vec, tanh_backward, Axis, Mat};

/// Bilinear soft-alignment matrix `U` (`c x c`).
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub u: Mat,
}

impl AttentionParams {
    pub fn new(u: Mat) -> Result<Self> {
        if u.rows() != u.cols() {
            return Err(Error::Contract(format!(
                "attention matrix must be square, got {}x{}",
                u.rows(),
                u.cols()
            )));
        }
        Ok(AttentionParams { u })
    }

    pub fn init(channels: usize, rng: &mut impl Rng) -> Self {
        AttentionParams {
            u: init_uniform(channels, channels, rng),
        }
    }

    pub fn zeros(channels: usize) -> Self {
        AttentionParams {
            u: Mat::zeros(channels, channels),
        }
    }

    pub fn channels(&self) -> usize {
        self.u.rows()
    }
}

/// Soft alignment and the two attention vectors of one scored pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTrace {
    /// `M x L` alignment `tanh(Q^T U A)`.
    pub g_matrix: Mat,
    pub sigma_q: Vec<f64>,
    pub sigma_a: Vec<f64>,
}

/// Intermediates for [`attention_backward`].
#[derive(Debug, Clone)]
pub struct AttentionCache {
    pub trace: AttentionTrace,
    /// `U A`, reused for the question cotangent.
    ua: Mat,
    /// Column of `G` holding each row maximum.
    row_argmax: Vec<usize>,
    /// Row of `G` holding each column maximum.
    col_argmax: Vec<usize>,
}

impl AttentionCache {
    /// Argmax positions behind `g_q` and `g_a`, in that order.
    pub fn selection(&self) -> (&[usize], &[usize]) {
        (&self.row_argmax, &self.col_argmax)
    }
}

fn check_shapes(q: &Mat, a: &Mat, p: &AttentionParams) -> Result<()> {
    if q.rows() != p.channels() {
        return Err(Error::shape("soft_alignment (Q vs U)", q.shape(), p.u.shape()));
    }
    if a.rows() != p.channels() {
        return Err(Error::shape("soft_alignment (A vs U)", a.shape(), p.u.shape()));
    }
    Ok(())
}

/// `G = tanh(Q^T U A)`; entry `(m, l)` scores question position `m`
/// against answer position `l`.
pub fn soft_alignment(q: &Mat, a: &Mat, p: &AttentionParams) -> Result<Mat> {
    check_shapes(q, a, p)?;
    let ua = p.u.matmul(a)?;
    Ok(q.transpose().matmul(&ua)?.map_tanh())
}

/// `M @ weights` where each output entry is an [`ordered_sum`] over
/// sequence positions.
pub fn weighted_columns(m: &Mat, weights: &[f64]) -> Vec<f64> {
    debug_assert_eq!(m.cols(), weights.len());
    (0..m.rows())
        .map(|j| {
            let terms: Vec<f64> = m.row(j).iter().zip(weights).map(|(v, w)| v * w).collect();
            ordered_sum(&terms)
        })
        .collect()
}

/// Attentive pooling of a question/answer pair.
///
/// `g_q[m] = max_l G[m, l]`, `g_a[l] = max_m G[m, l]`, each passed through
/// a softmax, and the representations are the attention-weighted column
/// sums `r_q = Q sigma_q`, `r_a = A sigma_a` (no further nonlinearity).
/// Reductions over positions are order independent, so permuting the
/// columns of `A` permutes `sigma_a` and leaves `r_q`, `r_a` bit-identical.
pub fn attention_pool(q: &Mat, a: &Mat, p: &AttentionParams) -> Result<(Vec<f64>, Vec<f64>, AttentionTrace)> {
    let (r_q, r_a, cache) = attention_forward(q, a, p)?;
    Ok((r_q, r_a, cache.trace))
}

pub fn attention_forward(
    q: &Mat,
    a: &Mat,
    p: &AttentionParams,
) -> Result<(Vec<f64>, Vec<f64>, AttentionCache)> {
    check_shapes(q, a, p)?;
    let ua = p.u.matmul(a)?;
    let g = q.transpose().matmul(&ua)?.map_tanh();
    let row_argmax = g.axis_argmax(Axis::Rows);
    let col_argmax = g.axis_argmax(Axis::Cols);
    let g_q: Vec<f64> = row_argmax.iter().enumerate().map(|(m, &l)| g[(m, l)]).collect();
    let g_a: Vec<f64> = col_argmax.iter().enumerate().map(|(l, &m)| g[(m, l)]).collect();
    let sigma_q = softmax_vec(&g_q)?;
    let sigma_a = softmax_vec(&g_a)?;
    let r_q = weighted_columns(q, &sigma_q);
    let r_a = weighted_columns(a, &sigma_a);
    let cache = AttentionCache {
        trace: AttentionTrace {
            g_matrix: g,
            sigma_q,
            sigma_a,
        },
        ua,
        row_argmax,
        col_argmax,
    };
    Ok((r_q, r_a, cache))
}

/// Backward through attentive pooling. Adds `dU` into `du` and returns
/// `(dQ, dA)`.
pub fn attention_backward(
    q: &Mat,
    a: &Mat,
    p: &AttentionParams,
    cache: &AttentionCache,
    dr_q: &[f64],
    dr_a: &[f64],
    du: &mut Mat,
) -> Result<(Mat, Mat)> {
    let trace = &cache.trace;
    let mut dq = Mat::outer(dr_q, &trace.sigma_q);
    let mut da = Mat::outer(dr_a, &trace.sigma_a);

    let dg_q = softmax_backward(&trace.sigma_q, &q.tr_matvec(dr_q)?);
    let dg_a = softmax_backward(&trace.sigma_a, &a.tr_matvec(dr_a)?);

    let g = &trace.g_matrix;
    let mut ds = Mat::zeros(g.rows(), g.cols());
    for (m, (&l, d)) in cache.row_argmax.iter().zip(&dg_q).enumerate() {
        ds[(m, l)] += d;
    }
    for (l, (&m, d)) in cache.col_argmax.iter().zip(&dg_a).enumerate() {
        ds[(m, l)] += d;
    }
    for (s, gv) in ds.data_mut().iter_mut().zip(g.data()) {
        *s = tanh_backward(*gv, *s);
    }

    // S = Q^T (U A): dQ += (U A) dS^T, dA += (U^T Q) dS, dU += Q dS A^T
    dq.add_assign(&cache.ua.matmul(&ds.transpose())?)?;
    da.add_assign(&p.u.transpose().matmul(q)?.matmul(&ds)?)?;
    du.add_assign(&q.matmul(&ds)?.matmul(&a.transpose())?)?;
    Ok((dq, da))
}
