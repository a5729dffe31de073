use rand::Rng;

use super::init_uniform;
use crate::error::{Error, Result};
use crate::numcore::Mat;

/// Left and right neighbour counts for a window of `k` words centred on the
/// current one. Odd `k` is symmetric. Even `k` takes `k/2 - 1` words on the
/// left and `k/2` on the right, so `k = 2` pairs each word with its
/// successor.
pub fn window_extent(k: usize) -> Result<(usize, usize)> {
    if k == 0 {
        return Err(Error::Config("context window must be >= 1".into()));
    }
    let left = (k - 1) / 2;
    Ok((left, k - 1 - left))
}

/// Stacks, for every position `m`, the `k` embeddings of the window around
/// `m` into column `m` of a `d*k x T` matrix. Positions outside the
/// sequence contribute zero vectors.
pub fn build_context_matrix(emb: &Mat, k: usize) -> Result<Mat> {
    let (left, _) = window_extent(k)?;
    let (d, t_len) = emb.shape();
    let mut z = Mat::zeros(d * k, t_len);
    for m in 0..t_len {
        for j in 0..k {
            let Some(pos) = (m + j).checked_sub(left).filter(|p| *p < t_len) else {
                continue;
            };
            for r in 0..d {
                z[(j * d + r, m)] = emb[(r, pos)];
            }
        }
    }
    Ok(z)
}

/// Adjoint of [`build_context_matrix`]: folds a `d*k x T` cotangent back onto
/// the `d x T` embeddings.
pub fn context_matrix_backward(dz: &Mat, d: usize, k: usize) -> Result<Mat> {
    let (left, _) = window_extent(k)?;
    if dz.rows() != d * k {
        return Err(Error::shape("context_matrix_backward", dz.shape(), (d * k, dz.cols())));
    }
    let t_len = dz.cols();
    let mut demb = Mat::zeros(d, t_len);
    for m in 0..t_len {
        for j in 0..k {
            let Some(pos) = (m + j).checked_sub(left).filter(|p| *p < t_len) else {
                continue;
            };
            for r in 0..d {
                demb[(r, pos)] += dz[(j * d + r, m)];
            }
        }
    }
    Ok(demb)
}

/// Convolution filters `W1` (`c x d*k`) and bias `b1` (`c x 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub w1: Mat,
    pub b1: Mat,
    pub k: usize,
}

impl ConvParams {
    pub fn new(w1: Mat, b1: Mat, k: usize) -> Result<Self> {
        window_extent(k)?;
        if !w1.cols().is_multiple_of(k) {
            return Err(Error::Config(format!(
                "W1 has {} columns, not a multiple of window {k}",
                w1.cols()
            )));
        }
        if b1.shape() != (w1.rows(), 1) {
            return Err(Error::shape("conv bias", b1.shape(), (w1.rows(), 1)));
        }
        Ok(ConvParams { w1, b1, k })
    }

    /// Glorot-uniform filters, zero bias.
    pub fn init(d: usize, filters: usize, k: usize, rng: &mut impl Rng) -> Result<Self> {
        if d == 0 || filters == 0 {
            return Err(Error::Config("convolution dims must be >= 1".into()));
        }
        window_extent(k)?;
        Ok(ConvParams {
            w1: init_uniform(filters, d * k, rng),
            b1: Mat::zeros(filters, 1),
            k,
        })
    }

    pub fn filters(&self) -> usize {
        self.w1.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols() / self.k
    }

    pub fn zeros_like(&self) -> Self {
        ConvParams {
            w1: Mat::zeros(self.w1.rows(), self.w1.cols()),
            b1: Mat::zeros(self.b1.rows(), 1),
            k: self.k,
        }
    }
}

/// `W1 z + b1`, with `b1` added to every column.
pub fn conv_forward(z: &Mat, p: &ConvParams) -> Result<Mat> {
    let mut out = p.w1.matmul(z)?;
    for i in 0..out.rows() {
        let b = p.b1[(i, 0)];
        for t in 0..out.cols() {
            out[(i, t)] += b;
        }
    }
    Ok(out)
}

/// Accumulates parameter cotangents into `grads` and returns `dz`.
pub fn conv_backward(z: &Mat, p: &ConvParams, dout: &Mat, grads: &mut ConvParams) -> Result<Mat> {
    grads.w1.add_assign(&dout.matmul(&z.transpose())?)?;
    for i in 0..dout.rows() {
        grads.b1[(i, 0)] += dout.row(i).iter().sum::<f64>();
    }
    p.w1.transpose().matmul(dout)
}
