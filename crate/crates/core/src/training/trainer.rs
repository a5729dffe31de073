use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, RngState};
use super::sampler::{sample_hardest_negative, NegativeCandidate};
use super::{epoch_lr, hinge_loss, TrainingConfig};
use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::eval::{evaluate, Metrics, QAExample};
use crate::model::{Model, ModelGrads};

#[derive(Debug, Clone)]
struct Answer {
    id: String,
    ids: Vec<usize>,
}

#[derive(Debug, Clone)]
struct TrainQuestion {
    id: String,
    q_ids: Vec<usize>,
    positives: Vec<Answer>,
    /// Own label-0 candidates; empty means "draw from the global pool".
    negatives: Vec<Answer>,
}

/// Training questions resolved to vocabulary ids.
///
/// Negatives come from each question's own label-0 candidates. A question
/// without any falls back to the pool of every distinct answer in the set
/// other than its own positives.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    questions: Vec<TrainQuestion>,
    global: Vec<Answer>,
}

impl TrainingSet {
    pub fn compile(examples: &[QAExample], embeddings: &EmbeddingTable) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::Data("training set is empty".into()));
        }
        let mut global = Vec::new();
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        let mut questions = Vec::with_capacity(examples.len());
        for ex in examples {
            let mut positives = Vec::new();
            let mut negatives = Vec::new();
            for c in &ex.candidates {
                let answer = Answer {
                    id: c.id.clone(),
                    ids: embeddings.ids(&c.tokens),
                };
                if seen.insert(answer.ids.clone()) {
                    global.push(Answer {
                        id: format!("{}/{}", ex.question_id, c.id),
                        ids: answer.ids.clone(),
                    });
                }
                if c.is_relevant() {
                    positives.push(answer);
                } else {
                    negatives.push(answer);
                }
            }
            if positives.is_empty() {
                return Err(Error::Data(format!(
                    "training question {:?} has no relevant candidate",
                    ex.question_id
                )));
            }
            questions.push(TrainQuestion {
                id: ex.question_id.clone(),
                q_ids: embeddings.ids(&ex.question),
                positives,
                negatives,
            });
        }
        let set = TrainingSet { questions, global };
        for q in &set.questions {
            if set.negative_pool(q).is_empty() {
                return Err(Error::Data(format!("question {:?} has no negative candidates", q.id)));
            }
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    fn negative_pool<'a>(&'a self, q: &'a TrainQuestion) -> Vec<NegativeCandidate<'a>> {
        let to_candidate = |a: &'a Answer| NegativeCandidate { id: &a.id, ids: &a.ids };
        if !q.negatives.is_empty() {
            return q.negatives.iter().map(to_candidate).collect();
        }
        self.global
            .iter()
            .filter(|a| q.positives.iter().all(|p| p.ids != a.ids))
            .map(to_candidate)
            .collect()
    }
}

/// Summary of one training epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub mean_loss: f64,
    /// Triples with a positive hinge loss.
    pub active_triples: usize,
    pub updates: usize,
    pub dev: Option<Metrics>,
}

/// Mutable training state: parameters, RNG and completed-epoch counter.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainingConfig,
    model: Model,
    rng: ChaCha8Rng,
    epoch: usize,
}

impl Trainer {
    /// Fresh parameters drawn from `config.seed`; the same stream then
    /// drives shuffling and negative sampling.
    pub fn new(config: TrainingConfig, mut embeddings: EmbeddingTable) -> Result<Self> {
        config.validate()?;
        if embeddings.dim() != config.dim {
            return Err(Error::Config(format!(
                "embeddings are {}-d, configured dimension is {}",
                embeddings.dim(),
                config.dim
            )));
        }
        embeddings.trainable = config.embeddings_trainable;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let model = Model::init(config.model, embeddings, config.width, config.window, &mut rng)?;
        Ok(Trainer {
            config,
            model,
            rng,
            epoch: 0,
        })
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        ckpt.config.validate()?;
        let rng = ckpt.rng.restore()?;
        Ok(Trainer {
            config: ckpt.config,
            model: ckpt.model,
            rng,
            epoch: ckpt.epoch,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            model: self.model.clone(),
            epoch: self.epoch,
            rng: RngState::capture(&self.rng),
        }
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.config
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// One pass over `data`: shuffle questions, then per minibatch pick one
    /// (q, a+, a-) triple per question with the pre-update parameters and
    /// take one SGD step on the minibatch-mean hinge loss.
    pub fn run_epoch(&mut self, data: &TrainingSet) -> Result<EpochRecord> {
        let t = self.epoch + 1;
        let lr = epoch_lr(self.config.learning_rate, t)?;
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);

        let mut total_loss = 0.0;
        let mut active = 0;
        let mut updates = 0;
        for batch in order.chunks(self.config.batch_size) {
            let mut triples = Vec::with_capacity(batch.len());
            for &qi in batch {
                let q = &data.questions[qi];
                let pos = &q.positives[self.rng.gen_range(0..q.positives.len())];
                let pool = data.negative_pool(q);
                let (ni, _) = sample_hardest_negative(
                    &self.model,
                    &q.id,
                    &q.q_ids,
                    &pool,
                    self.config.neg_samples,
                    &mut self.rng,
                )?;
                triples.push((q, pos, pool[ni].ids));
            }

            let scale = 1.0 / batch.len() as f64;
            let mut grads = ModelGrads::zeros(&self.model);
            let mut batch_active = 0;
            for (q, pos, neg_ids) in triples {
                let f_pos = self.model.forward_ids(&q.q_ids, &pos.ids)?;
                let f_neg = self.model.forward_ids(&q.q_ids, neg_ids)?;
                let loss = hinge_loss(f_pos.score, f_neg.score, self.config.margin);
                total_loss += loss;
                if loss > 0.0 {
                    batch_active += 1;
                    self.model.backward_pair(&f_pos, -scale, &mut grads)?;
                    self.model.backward_pair(&f_neg, scale, &mut grads)?;
                }
            }
            if batch_active > 0 {
                self.model.apply_sgd(&grads, lr)?;
                updates += 1;
            }
            active += batch_active;
        }

        self.epoch = t;
        Ok(EpochRecord {
            epoch: t,
            learning_rate: lr,
            mean_loss: total_loss / data.len() as f64,
            active_triples: active,
            updates,
            dev: None,
        })
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// State after the last epoch.
    pub last: Checkpoint,
    /// State after the epoch with the best dev metrics (P@1, then MAP,
    /// earliest epoch on ties). `None` without a dev set.
    pub best: Option<Checkpoint>,
    pub history: Vec<EpochRecord>,
}

impl TrainOutcome {
    /// The best dev checkpoint if there is one, else the last.
    pub fn selected(&self) -> &Checkpoint {
        self.best.as_ref().unwrap_or(&self.last)
    }
}

/// Trains for `config.epochs` epochs, recording dev metrics per epoch when
/// `dev` is given.
pub fn train(
    config: TrainingConfig,
    dataset: &[QAExample],
    embeddings: EmbeddingTable,
    dev: Option<&[QAExample]>,
) -> Result<TrainOutcome> {
    let data = TrainingSet::compile(dataset, &embeddings)?;
    let mut trainer = Trainer::new(config, embeddings)?;
    let mut history = Vec::new();
    let mut best: Option<(Metrics, Checkpoint)> = None;
    for _ in 0..trainer.config.epochs {
        let mut record = trainer.run_epoch(&data)?;
        if let Some(dev) = dev {
            let m = evaluate(&trainer.model, dev)?;
            record.dev = Some(m);
            let improved = best.as_ref().is_none_or(|(b, _)| {
                (m.precision_at_1, m.map) > (b.precision_at_1, b.map)
            });
            if improved {
                best = Some((m, trainer.checkpoint()));
            }
        }
        history.push(record);
    }
    Ok(TrainOutcome {
        last: trainer.checkpoint(),
        best: best.map(|(_, c)| c),
        history,
    })
}
