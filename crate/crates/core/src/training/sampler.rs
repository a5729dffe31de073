use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::Model;

/// A negative answer as the sampler sees it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NegativeCandidate<'a> {
    pub id: &'a str,
    pub ids: &'a [usize],
}

/// Draws `min(n, |pool|)` negatives without replacement, scores them with
/// `model` and returns `(pool index, score)` of the highest scorer. Ties go
/// to the lowest candidate id.
pub fn sample_hardest_negative<R: Rng + ?Sized>(
    model: &Model,
    question_id: &str,
    q_ids: &[usize],
    pool: &[NegativeCandidate<'_>],
    n: usize,
    rng: &mut R,
) -> Result<(usize, f64)> {
    if pool.is_empty() {
        return Err(Error::Data(format!("question {question_id:?} has no negative candidates")));
    }
    if n == 0 {
        return Err(Error::Contract("negative sample count must be >= 1".into()));
    }
    let amount = n.min(pool.len());
    let mut best: Option<(usize, f64)> = None;
    for i in index::sample(rng, pool.len(), amount) {
        let score = model.score_ids(q_ids, pool[i].ids).map_err(|e| {
            Error::Scoring(format!("question {question_id:?}, candidate {:?}: {e}", pool[i].id))
        })?;
        let better = match best {
            None => true,
            Some((j, s)) => score > s || (score == s && (pool[i].id, i) < (pool[j].id, j)),
        };
        if better {
            best = Some((i, score));
        }
    }
    Ok(best.expect("at least one draw"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::build_vocab;
    use crate::model::ModelKind;
    use crate::pooling::AttentionParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> Model {
        let words = ["q", "x", "y", "z", "w", "v"];
        let emb = build_vocab(words, None, 4, 3).unwrap();
        Model::init(ModelKind::ApCnn, emb, 5, 3, &mut ChaCha8Rng::seed_from_u64(3)).unwrap()
    }

    #[test]
    fn single_negative_always_wins() {
        let m = model();
        let ids = [2usize, 3];
        let pool = [NegativeCandidate { id: "only", ids: &ids }];
        for n in [1, 5, 50] {
            let (i, _) = sample_hardest_negative(&m, "q1", &[1], &pool, n, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            assert_eq!(i, 0);
        }
    }

    #[test]
    fn picks_the_argmax() {
        let m = model();
        let seqs: Vec<Vec<usize>> = vec![vec![2, 3], vec![4], vec![5, 6, 2], vec![3, 3]];
        let pool: Vec<NegativeCandidate> = seqs
            .iter()
            .enumerate()
            .map(|(i, s)| NegativeCandidate { id: ["a", "b", "c", "d"][i], ids: s })
            .collect();
        let q = [1usize, 2];
        let scores: Vec<f64> = seqs.iter().map(|s| m.score_ids(&q, s).unwrap()).collect();
        let expected = crate::numcore::argmax(&scores);
        let (i, s) = sample_hardest_negative(&m, "q", &q, &pool, 50, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(i, expected);
        assert_eq!(s, scores[expected]);
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let mut m = model();
        m.attention = Some(AttentionParams::zeros(m.channels()));
        let same = [2usize, 3];
        let pool = [
            NegativeCandidate { id: "c9", ids: &same },
            NegativeCandidate { id: "c1", ids: &same },
            NegativeCandidate { id: "c5", ids: &same },
        ];
        for seed in 0..10 {
            let (i, _) = sample_hardest_negative(&m, "q", &[1], &pool, 3, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(pool[i].id, "c1");
        }
    }

    #[test]
    fn empty_pool_names_the_question() {
        let err = sample_hardest_negative(&model(), "q42", &[1], &[], 3, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(&err, Error::Data(msg) if msg.contains("q42")));
    }

    #[test]
    fn sampling_is_seeded() {
        let m = model();
        let seqs: Vec<Vec<usize>> = (0..30).map(|i| vec![1 + i % 6, 1 + (i * 7) % 6]).collect();
        let names: Vec<String> = (0..30).map(|i| format!("n{i:02}")).collect();
        let pool: Vec<NegativeCandidate> = seqs
            .iter()
            .zip(&names)
            .map(|(s, id)| NegativeCandidate { id, ids: s })
            .collect();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..10)
                .map(|_| sample_hardest_negative(&m, "q", &[1, 2], &pool, 4, &mut rng).unwrap().0)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(7), run(7));
    }
}
