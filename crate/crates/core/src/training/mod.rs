//! Pairwise hinge-loss training with hardest-negative sampling.

mod checkpoint;
mod gradcheck;
mod sampler;
mod trainer;

pub use checkpoint::{
    checkpoint_load, checkpoint_save, read_checkpoint, write_checkpoint, Checkpoint, RngState,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use gradcheck::{check_model_gradients, ToyDims};
pub use sampler::{sample_hardest_negative, NegativeCandidate};
pub use trainer::{train, EpochRecord, TrainOutcome, Trainer, TrainingSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, ModelGrads, ModelKind};

/// Hyper-parameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub model: ModelKind,
    /// Embedding dimension `d`.
    pub dim: usize,
    /// Filter count `c` for CNN kinds, hidden size `H` for biLSTM kinds.
    pub width: usize,
    /// Context window `k` (CNN kinds only).
    pub window: usize,
    pub batch_size: usize,
    pub margin: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub neg_samples: usize,
    pub seed: u64,
    pub embeddings_trainable: bool,
    /// Lowercase tokens on ingestion; kept so scoring normalises the same way.
    #[serde(default)]
    pub lowercase: bool,
}

impl TrainingConfig {
    /// Default hyper-parameters for `model` with 100-d embeddings.
    pub fn new(model: ModelKind) -> Self {
        // (width, window, batch, margin, lr)
        let (width, window, batch_size, margin, learning_rate) = match model {
            ModelKind::ApCnn => (400, 3, 20, 0.5, 1.1),
            ModelKind::QaCnn => (4000, 2, 1, 0.009, 0.05),
            ModelKind::ApBiLstm => (141, 1, 20, 0.2, 1.1),
            ModelKind::QaBiLstm => (141, 1, 20, 0.1, 1.1),
        };
        TrainingConfig {
            model,
            dim: 100,
            width,
            window,
            batch_size,
            margin,
            learning_rate,
            epochs: 20,
            neg_samples: 50,
            seed: 1,
            embeddings_trainable: false,
            lowercase: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.margin > 0.0) || !self.margin.is_finite() {
            return bad("margin must be > 0");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning rate must be > 0");
        }
        if self.neg_samples == 0 {
            return bad("negative sample count must be >= 1");
        }
        if self.dim == 0 || self.width == 0 || self.batch_size == 0 {
            return bad("dimensions and batch size must be >= 1");
        }
        if self.model.is_convolutional() && self.window == 0 {
            return bad("context window must be >= 1");
        }
        Ok(())
    }
}

/// `max(0, margin - s_pos + s_neg)`.
pub fn hinge_loss(s_pos: f64, s_neg: f64, margin: f64) -> f64 {
    (margin - s_pos + s_neg).max(0.0)
}

/// Subgradient of [`hinge_loss`] w.r.t. `(s_pos, s_neg)`; zero when inactive.
pub fn hinge_grad(s_pos: f64, s_neg: f64, margin: f64) -> (f64, f64) {
    if margin - s_pos + s_neg > 0.0 {
        (-1.0, 1.0)
    } else {
        (0.0, 0.0)
    }
}

/// `lr / t` for the 1-based epoch `t`.
pub fn epoch_lr(initial_lr: f64, epoch: usize) -> Result<f64> {
    if epoch < 1 {
        return Err(Error::Contract("epochs are counted from 1".into()));
    }
    Ok(initial_lr / epoch as f64)
}

/// `p -= lr * g` over every parameter; see [`Model::apply_sgd`].
pub fn sgd_step(model: &mut Model, grads: &ModelGrads, lr: f64) -> Result<()> {
    model.apply_sgd(grads, lr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::build_vocab;
    use crate::numcore::ParamSet;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hinge_examples() {
        assert_eq!(hinge_loss(0.9, 0.2, 0.5), 0.0);
        assert!((hinge_loss(0.3, 0.2, 0.5) - 0.4).abs() < 1e-15);
        assert_eq!(hinge_loss(0.7, 0.7, 0.25), 0.25);
        assert_eq!(hinge_grad(0.9, 0.2, 0.5), (0.0, 0.0));
        assert_eq!(hinge_grad(0.3, 0.2, 0.5), (-1.0, 1.0));
    }

    proptest! {
        #[test]
        fn hinge_nonnegative(p in -1.0f64..1.0, n in -1.0f64..1.0, m in 0.01f64..2.0) {
            let l = hinge_loss(p, n, m);
            prop_assert!(l >= 0.0);
            prop_assert_eq!(l == 0.0, p - n >= m);
        }
    }

    #[test]
    fn per_kind_defaults() {
        let ap = TrainingConfig::new(ModelKind::ApCnn);
        assert_eq!((ap.width, ap.window, ap.batch_size, ap.margin, ap.learning_rate), (400, 3, 20, 0.5, 1.1));
        let qa = TrainingConfig::new(ModelKind::QaCnn);
        assert_eq!((qa.width, qa.window, qa.batch_size, qa.margin, qa.learning_rate), (4000, 2, 1, 0.009, 0.05));
        assert_eq!(TrainingConfig::new(ModelKind::ApBiLstm).margin, 0.2);
        assert_eq!(TrainingConfig::new(ModelKind::QaBiLstm).margin, 0.1);
        assert_eq!(TrainingConfig::new(ModelKind::QaBiLstm).width * 2, 282);
        assert_eq!(ap.neg_samples, 50);
    }

    #[test]
    fn learning_rate_schedule() {
        assert_eq!(epoch_lr(1.1, 1).unwrap(), 1.1);
        assert_eq!(epoch_lr(1.1, 2).unwrap(), 0.55);
        assert!(epoch_lr(1.1, 0).is_err());
        let lrs: Vec<f64> = (1..=20).map(|t| epoch_lr(1.1, t).unwrap()).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn config_validation() {
        let ok = TrainingConfig::new(ModelKind::ApCnn);
        assert!(ok.validate().is_ok());
        for broken in [
            TrainingConfig { margin: 0.0, ..ok.clone() },
            TrainingConfig { learning_rate: -1.0, ..ok.clone() },
            TrainingConfig { neg_samples: 0, ..ok.clone() },
            TrainingConfig { dim: 0, ..ok.clone() },
            TrainingConfig { window: 0, ..ok.clone() },
        ] {
            assert!(matches!(broken.validate(), Err(Error::Config(_))));
        }
        let lstm = TrainingConfig { window: 0, ..TrainingConfig::new(ModelKind::QaBiLstm) };
        assert!(lstm.validate().is_ok());
    }

    fn toy(kind: ModelKind) -> Model {
        let emb = build_vocab(["a", "b", "c"], None, 3, 1).unwrap();
        Model::init(kind, emb, 4, 3, &mut ChaCha8Rng::seed_from_u64(2)).unwrap()
    }

    #[test]
    fn sgd_arithmetic() {
        let mut m = toy(ModelKind::QaCnn);
        let before = m.clone();
        let zero = ModelGrads::zeros(&m);
        sgd_step(&mut m, &zero, 0.1).unwrap();
        assert_eq!(m, before);

        let mut g = ModelGrads::zeros(&m);
        if let crate::encoders::Encoder::Conv(c) = &mut g.encoder {
            c.b1 = crate::numcore::Mat::filled(4, 1, 0.5);
        }
        if let crate::encoders::Encoder::Conv(c) = &mut m.encoder {
            c.b1 = crate::numcore::Mat::filled(4, 1, 1.0);
        }
        sgd_step(&mut m, &g, 0.1).unwrap();
        if let crate::encoders::Encoder::Conv(c) = &m.encoder {
            assert!(c.b1.data().iter().all(|&v| v == 0.95));
        }
        assert!(sgd_step(&mut m, &g, 0.0).is_err());
    }

    #[test]
    fn doubled_gradient_half_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for kind in ModelKind::ALL {
            let m = toy(kind);
            let mut g = ModelGrads::zeros(&m);
            for (_, t) in g.encoder.tensors_mut() {
                for v in t.data_mut() {
                    *v = rand::Rng::gen_range(&mut rng, -1.0..1.0);
                }
            }
            let mut a = m.clone();
            a.apply_sgd(&g, 0.3).unwrap();
            let mut g2 = g.clone();
            g2.scale(2.0);
            let mut b = m.clone();
            b.apply_sgd(&g2, 0.15).unwrap();
            for ((_, x), (_, y)) in a.tensors().iter().zip(b.tensors()) {
                for (u, v) in x.data().iter().zip(y.data()) {
                    assert!((u - v).abs() <= 1e-15);
                }
            }
        }
    }
}
