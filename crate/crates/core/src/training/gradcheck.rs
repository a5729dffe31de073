use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::hinge_loss;
use crate::embed::build_vocab;
use crate::error::Result;
use crate::model::{Model, ModelGrads, ModelKind};
use crate::numcore::{grad_check_piecewise, GradCheckReport, DEFAULT_STEP};

/// Toy dimensions for the full-objective gradient check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyDims {
    pub dim: usize,
    pub question_len: usize,
    pub answer_len: usize,
    pub filters: usize,
    pub window: usize,
    pub hidden: usize,
    pub vocab: usize,
}

impl Default for ToyDims {
    fn default() -> Self {
        ToyDims {
            dim: 4,
            question_len: 5,
            answer_len: 7,
            filters: 6,
            window: 3,
            hidden: 3,
            vocab: 12,
        }
    }
}

/// Compares the analytic gradient of `hinge(s(q, a+), s(q, a-))` with
/// central differences over every parameter of a freshly seeded model.
/// The margin is chosen so the hinge is active with slack 1. Coordinates
/// whose probes flip a max-pooling selection are reported as kinks.
pub fn check_model_gradients(
    kind: ModelKind,
    dims: ToyDims,
    embeddings_trainable: bool,
    seed: u64,
) -> Result<GradCheckReport> {
    let words: Vec<String> = (0..dims.vocab).map(|i| format!("w{i}")).collect();
    let mut emb = build_vocab(words.iter().map(String::as_str), None, dims.dim, seed)?;
    emb.trainable = embeddings_trainable;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = if kind.is_convolutional() { dims.filters } else { dims.hidden };
    let mut model = Model::init(kind, emb, width, dims.window, &mut rng)?;

    let mut draw = |n: usize| -> Vec<usize> { (0..n).map(|_| rng.gen_range(1..=dims.vocab)).collect() };
    let q = draw(dims.question_len);
    let pos = draw(dims.answer_len);
    let neg = draw(dims.answer_len);

    let f_pos = model.forward_ids(&q, &pos)?;
    let f_neg = model.forward_ids(&q, &neg)?;
    let margin = (f_pos.score - f_neg.score).max(0.0) + 1.0;
    debug_assert!(hinge_loss(f_pos.score, f_neg.score, margin) > 0.5);

    let mut grads = ModelGrads::zeros(&model);
    model.backward_pair(&f_pos, -1.0, &mut grads)?;
    model.backward_pair(&f_neg, 1.0, &mut grads)?;
    let analytic = grads.dense(&model);

    grad_check_piecewise(&mut model, &analytic, DEFAULT_STEP, |m: &Model| {
        match (m.forward_ids(&q, &pos), m.forward_ids(&q, &neg)) {
            (Ok(fp), Ok(fq)) => (hinge_loss(fp.score, fq.score, margin), (fp.branch(), fq.branch())),
            _ => (f64::NAN, (Vec::new(), Vec::new())),
        }
    })
}
