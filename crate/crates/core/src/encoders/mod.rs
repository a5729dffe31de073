//! Sequence encoders turning a `d x T` embedding sequence into a `c x T`
//! feature matrix. One parameter set encodes both the question and the
//! answer.

mod conv;
mod lstm;

pub use conv::{
    build_context_matrix, context_matrix_backward, conv_backward, conv_forward, window_extent,
    ConvParams,
};
pub use lstm::{
    bilstm_backward, bilstm_encode, bilstm_forward, direction_backward, lstm_step, run_direction,
    BiLstmCache, BiLstmParams, Gate, LstmDirection, LstmStep, GATES,
};

use rand::Rng;

use crate::error::Result;
use crate::numcore::{Mat, ParamSet};

/// `rows x cols` matrix uniform in `[-r, r]`, `r = sqrt(6 / (rows + cols))`.
pub fn init_uniform(rows: usize, cols: usize, rng: &mut impl Rng) -> Mat {
    let r = (6.0 / (rows + cols) as f64).sqrt();
    let mut m = Mat::zeros(rows, cols);
    for v in m.data_mut() {
        *v = rng.gen_range(-r..=r);
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub enum Encoder {
    Conv(ConvParams),
    BiLstm(BiLstmParams),
}

/// Forward intermediates needed by [`Encoder::backward`].
#[derive(Debug, Clone)]
pub enum EncoderCache {
    Conv { z: Mat },
    BiLstm(BiLstmCache),
}

impl Encoder {
    /// Output channel count `c`.
    pub fn channels(&self) -> usize {
        match self {
            Encoder::Conv(p) => p.filters(),
            Encoder::BiLstm(p) => p.channels(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Encoder::Conv(p) => p.input_dim(),
            Encoder::BiLstm(p) => p.forward.input_dim(),
        }
    }

    /// Context window size; recurrent encoders read one word at a time.
    pub fn window(&self) -> usize {
        match self {
            Encoder::Conv(p) => p.k,
            Encoder::BiLstm(_) => 1,
        }
    }

    pub fn encode(&self, emb: &Mat) -> Result<(Mat, EncoderCache)> {
        match self {
            Encoder::Conv(p) => {
                let z = build_context_matrix(emb, p.k)?;
                let out = conv_forward(&z, p)?;
                Ok((out, EncoderCache::Conv { z }))
            }
            Encoder::BiLstm(p) => {
                let (out, cache) = bilstm_encode(emb, p)?;
                Ok((out, EncoderCache::BiLstm(cache)))
            }
        }
    }

    /// Accumulates parameter cotangents into `grads` (same variant as
    /// `self`) and returns the embedding cotangent.
    pub fn backward(&self, cache: &EncoderCache, dout: &Mat, grads: &mut Encoder) -> Result<Mat> {
        match (self, cache, grads) {
            (Encoder::Conv(p), EncoderCache::Conv { z }, Encoder::Conv(g)) => {
                let dz = conv_backward(z, p, dout, g)?;
                context_matrix_backward(&dz, p.input_dim(), p.k)
            }
            (Encoder::BiLstm(p), EncoderCache::BiLstm(c), Encoder::BiLstm(g)) => {
                bilstm_backward(c, dout, p, g)
            }
            _ => Err(crate::Error::Contract(
                "encoder, cache and gradient variants differ".into(),
            )),
        }
    }

    pub fn zeros_like(&self) -> Encoder {
        match self {
            Encoder::Conv(p) => Encoder::Conv(p.zeros_like()),
            Encoder::BiLstm(p) => Encoder::BiLstm(p.zeros_like()),
        }
    }
}

fn lstm_names(prefix: &str) -> Vec<String> {
    let mut names = Vec::with_capacity(12);
    for kind in ["w", "u", "b"] {
        for g in GATES {
            names.push(format!("{prefix}.{kind}_{}", g.suffix()));
        }
    }
    names
}

impl ParamSet for Encoder {
    fn tensors(&self) -> Vec<(String, &Mat)> {
        match self {
            Encoder::Conv(p) => vec![("conv.w1".into(), &p.w1), ("conv.b1".into(), &p.b1)],
            Encoder::BiLstm(p) => {
                let mut out = Vec::with_capacity(24);
                for (prefix, dir) in [("lstm.fwd", &p.forward), ("lstm.bwd", &p.backward)] {
                    let mats = dir.w.iter().chain(&dir.u).chain(&dir.b);
                    out.extend(lstm_names(prefix).into_iter().zip(mats));
                }
                out
            }
        }
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Mat)> {
        match self {
            Encoder::Conv(p) => vec![("conv.w1".into(), &mut p.w1), ("conv.b1".into(), &mut p.b1)],
            Encoder::BiLstm(p) => {
                let mut out = Vec::with_capacity(24);
                for (prefix, dir) in [("lstm.fwd", &mut p.forward), ("lstm.bwd", &mut p.backward)] {
                    let mats = dir.w.iter_mut().chain(dir.u.iter_mut()).chain(dir.b.iter_mut());
                    out.extend(lstm_names(prefix).into_iter().zip(mats));
                }
                out
            }
        }
    }
}
