//! The four scoring architectures and their shared forward/backward path.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingTable;
use crate::encoders::{BiLstmParams, ConvParams, Encoder, EncoderCache};
use crate::error::{Error, Result};
use crate::numcore::{Mat, ParamSet};
use crate::pooling::{
    attention_backward, attention_forward, cosine_backward, cosine_score, maxpool_tanh_backward,
    maxpool_tanh_forward, AttentionCache, AttentionParams, AttentionTrace,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "QA-CNN")]
    QaCnn,
    #[serde(rename = "AP-CNN")]
    ApCnn,
    #[serde(rename = "QA-biLSTM")]
    QaBiLstm,
    #[serde(rename = "AP-biLSTM")]
    ApBiLstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::QaCnn,
        ModelKind::ApCnn,
        ModelKind::QaBiLstm,
        ModelKind::ApBiLstm,
    ];

    pub fn is_attentive(self) -> bool {
        matches!(self, ModelKind::ApCnn | ModelKind::ApBiLstm)
    }

    pub fn is_convolutional(self) -> bool {
        matches!(self, ModelKind::QaCnn | ModelKind::ApCnn)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::QaCnn => "QA-CNN",
            ModelKind::ApCnn => "AP-CNN",
            ModelKind::QaBiLstm => "QA-biLSTM",
            ModelKind::ApBiLstm => "AP-biLSTM",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().to_ascii_lowercase() == norm)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown model {s:?} (expected one of QA-CNN, AP-CNN, QA-biLSTM, AP-biLSTM)"
                ))
            })
    }
}

/// A complete scorer: embeddings, a shared encoder and, for the attentive
/// variants, the alignment matrix `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub kind: ModelKind,
    pub embeddings: EmbeddingTable,
    pub encoder: Encoder,
    pub attention: Option<AttentionParams>,
}

/// How the pair was pooled, with what backward needs.
#[derive(Debug, Clone)]
enum PoolCache {
    Max {
        q_argmax: Vec<usize>,
        a_argmax: Vec<usize>,
    },
    Attentive(AttentionCache),
}

/// Forward pass over one `(q, a)` pair with every intermediate retained.
#[derive(Debug, Clone)]
pub struct PairForward {
    q_ids: Vec<usize>,
    a_ids: Vec<usize>,
    q_enc: Mat,
    a_enc: Mat,
    q_cache: EncoderCache,
    a_cache: EncoderCache,
    pool: PoolCache,
    pub r_q: Vec<f64>,
    pub r_a: Vec<f64>,
    pub score: f64,
}

impl PairForward {
    pub fn trace(&self) -> Option<&AttentionTrace> {
        match &self.pool {
            PoolCache::Attentive(c) => Some(&c.trace),
            PoolCache::Max { .. } => None,
        }
    }

    /// The discrete max selections made while pooling. The score is smooth
    /// in the parameters wherever this stays fixed.
    pub fn branch(&self) -> Vec<usize> {
        let (a, b) = match &self.pool {
            PoolCache::Max { q_argmax, a_argmax } => (q_argmax.as_slice(), a_argmax.as_slice()),
            PoolCache::Attentive(c) => c.selection(),
        };
        a.iter().chain(b).copied().collect()
    }
}

impl Model {
    /// Fresh model. `width` is the filter count `c` for CNN kinds and the
    /// hidden size `H` for biLSTM kinds (giving `c = 2H`). `window` is
    /// ignored by the biLSTM kinds.
    pub fn init(
        kind: ModelKind,
        embeddings: EmbeddingTable,
        width: usize,
        window: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let d = embeddings.dim();
        let encoder = if kind.is_convolutional() {
            Encoder::Conv(ConvParams::init(d, width, window, rng)?)
        } else {
            Encoder::BiLstm(BiLstmParams::init(d, width, rng)?)
        };
        let attention = kind
            .is_attentive()
            .then(|| AttentionParams::init(encoder.channels(), rng));
        Ok(Model {
            kind,
            embeddings,
            encoder,
            attention,
        })
    }

    /// Assembles a model from parts, checking that they fit together.
    pub fn from_parts(
        kind: ModelKind,
        embeddings: EmbeddingTable,
        encoder: Encoder,
        attention: Option<AttentionParams>,
    ) -> Result<Self> {
        let conv = matches!(encoder, Encoder::Conv(_));
        if conv != kind.is_convolutional() {
            return Err(Error::Config(format!("{kind} cannot use this encoder")));
        }
        if encoder.input_dim() != embeddings.dim() {
            return Err(Error::Config(format!(
                "encoder expects {}-d inputs, embeddings are {}-d",
                encoder.input_dim(),
                embeddings.dim()
            )));
        }
        match (&attention, kind.is_attentive()) {
            (Some(a), true) if a.channels() == encoder.channels() => {}
            (None, false) => {}
            _ => return Err(Error::Config(format!("{kind} has inconsistent attention parameters"))),
        }
        Ok(Model {
            kind,
            embeddings,
            encoder,
            attention,
        })
    }

    pub fn channels(&self) -> usize {
        self.encoder.channels()
    }

    pub fn forward_ids(&self, q_ids: &[usize], a_ids: &[usize]) -> Result<PairForward> {
        let q_emb = self.embeddings.lookup_ids(q_ids)?;
        let a_emb = self.embeddings.lookup_ids(a_ids)?;
        let (q_enc, q_cache) = self.encoder.encode(&q_emb)?;
        let (a_enc, a_cache) = self.encoder.encode(&a_emb)?;
        let (r_q, r_a, pool) = match &self.attention {
            Some(att) => {
                let (r_q, r_a, cache) = attention_forward(&q_enc, &a_enc, att)?;
                (r_q, r_a, PoolCache::Attentive(cache))
            }
            None => {
                let (r_q, q_argmax) = maxpool_tanh_forward(&q_enc);
                let (r_a, a_argmax) = maxpool_tanh_forward(&a_enc);
                (r_q, r_a, PoolCache::Max { q_argmax, a_argmax })
            }
        };
        let score = cosine_score(&r_q, &r_a)?;
        Ok(PairForward {
            q_ids: q_ids.to_vec(),
            a_ids: a_ids.to_vec(),
            q_enc,
            a_enc,
            q_cache,
            a_cache,
            pool,
            r_q,
            r_a,
            score,
        })
    }

    pub fn score_ids(&self, q_ids: &[usize], a_ids: &[usize]) -> Result<f64> {
        self.forward_ids(q_ids, a_ids).map(|f| f.score)
    }

    /// Scores a tokenised pair; the trace is present for attentive kinds.
    pub fn score_pair<S: AsRef<str>>(
        &self,
        q_tokens: &[S],
        a_tokens: &[S],
    ) -> Result<(f64, Option<AttentionTrace>)> {
        let fwd = self.forward_ids(&self.embeddings.ids(q_tokens), &self.embeddings.ids(a_tokens))?;
        let trace = fwd.trace().cloned();
        Ok((fwd.score, trace))
    }

    /// Backpropagates `d_score` (the loss cotangent of the pair's score) and
    /// accumulates into `grads`. Embedding columns are touched only when
    /// the table is trainable.
    pub fn backward_pair(&self, fwd: &PairForward, d_score: f64, grads: &mut ModelGrads) -> Result<()> {
        let (dr_q, dr_a) = cosine_backward(&fwd.r_q, &fwd.r_a, d_score);
        let (dq, da) = match (&fwd.pool, &self.attention) {
            (PoolCache::Attentive(cache), Some(att)) => {
                let du = grads
                    .attention
                    .as_mut()
                    .ok_or_else(|| Error::Contract("gradient buffer lacks attention".into()))?;
                attention_backward(&fwd.q_enc, &fwd.a_enc, att, cache, &dr_q, &dr_a, du)?
            }
            (PoolCache::Max { q_argmax, a_argmax }, None) => (
                maxpool_tanh_backward(fwd.q_enc.shape(), &fwd.r_q, q_argmax, &dr_q),
                maxpool_tanh_backward(fwd.a_enc.shape(), &fwd.r_a, a_argmax, &dr_a),
            ),
            _ => return Err(Error::Contract("forward cache does not match model".into())),
        };
        let dq_emb = self.encoder.backward(&fwd.q_cache, &dq, &mut grads.encoder)?;
        let da_emb = self.encoder.backward(&fwd.a_cache, &da, &mut grads.encoder)?;
        if self.embeddings.trainable {
            grads.scatter_embedding(&fwd.q_ids, &dq_emb);
            grads.scatter_embedding(&fwd.a_ids, &da_emb);
        }
        Ok(())
    }

    /// Plain SGD: `p -= lr * g` for every parameter, embedding columns only
    /// when the table is trainable.
    pub fn apply_sgd(&mut self, grads: &ModelGrads, lr: f64) -> Result<()> {
        if !(lr > 0.0) {
            return Err(Error::Contract(format!("learning rate must be > 0, got {lr}")));
        }
        let g_enc = grads.encoder.tensors();
        let mut p_enc = self.encoder.tensors_mut();
        if g_enc.len() != p_enc.len() {
            return Err(Error::Contract("gradient does not match encoder".into()));
        }
        for ((_, p), (_, g)) in p_enc.iter_mut().zip(&g_enc) {
            p.axpy(-lr, g)?;
        }
        match (&mut self.attention, &grads.attention) {
            (Some(att), Some(du)) => att.u.axpy(-lr, du)?,
            (None, None) => {}
            _ => return Err(Error::Contract("gradient does not match attention".into())),
        }
        if self.embeddings.trainable {
            let d = self.embeddings.dim();
            for (&id, column) in &grads.embedding {
                if column.len() != d || id >= self.embeddings.vocab_size() {
                    return Err(Error::Contract(format!("bad embedding gradient for column {id}")));
                }
                for (r, g) in column.iter().enumerate() {
                    self.embeddings.w0[(r, id)] -= lr * g;
                }
            }
        }
        Ok(())
    }
}

impl ParamSet for Model {
    /// Encoder tensors, then `attention.u`, then `embedding.w0` if trainable.
    fn tensors(&self) -> Vec<(String, &Mat)> {
        let mut out = self.encoder.tensors();
        if let Some(att) = &self.attention {
            out.push(("attention.u".into(), &att.u));
        }
        if self.embeddings.trainable {
            out.push(("embedding.w0".into(), &self.embeddings.w0));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Mat)> {
        let mut out = self.encoder.tensors_mut();
        if let Some(att) = &mut self.attention {
            out.push(("attention.u".into(), &mut att.u));
        }
        if self.embeddings.trainable {
            out.push(("embedding.w0".into(), &mut self.embeddings.w0));
        }
        out
    }
}

/// Gradient buffer shaped like a [`Model`]. Embedding gradients are kept
/// sparse by column.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub encoder: Encoder,
    pub attention: Option<Mat>,
    pub embedding: BTreeMap<usize, Vec<f64>>,
}

impl ModelGrads {
    pub fn zeros(model: &Model) -> Self {
        ModelGrads {
            encoder: model.encoder.zeros_like(),
            attention: model.attention.as_ref().map(|a| Mat::zeros(a.channels(), a.channels())),
            embedding: BTreeMap::new(),
        }
    }

    fn scatter_embedding(&mut self, ids: &[usize], demb: &Mat) {
        for (t, &id) in ids.iter().enumerate() {
            let col = demb.col(t);
            let entry = self.embedding.entry(id).or_insert_with(|| vec![0.0; col.len()]);
            for (e, v) in entry.iter_mut().zip(&col) {
                *e += v;
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for (_, m) in self.encoder.tensors_mut() {
            m.scale(alpha);
        }
        if let Some(u) = &mut self.attention {
            u.scale(alpha);
        }
        for col in self.embedding.values_mut() {
            for v in col {
                *v *= alpha;
            }
        }
    }

    /// Dense gradients named like `model.tensors()`.
    pub fn dense(&self, model: &Model) -> Vec<(String, Mat)> {
        let mut out: Vec<(String, Mat)> = self
            .encoder
            .tensors()
            .into_iter()
            .map(|(n, m)| (n, m.clone()))
            .collect();
        if let Some(u) = &self.attention {
            out.push(("attention.u".into(), u.clone()));
        }
        if model.embeddings.trainable {
            let mut w0 = Mat::zeros(model.embeddings.dim(), model.embeddings.vocab_size());
            for (&id, col) in &self.embedding {
                w0.add_to_col(id, col);
            }
            out.push(("embedding.w0".into(), w0));
        }
        out
    }
}
