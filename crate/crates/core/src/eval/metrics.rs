//! Ranking and IR metrics over binary relevance.

use crate::error::{Error, Result};
use crate::eval::dataset::QAExample;
use crate::model::Model;

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub candidate_id: String,
    pub score: f64,
    pub label: u8,
}

/// Candidates of one question sorted by descending score, ties by
/// ascending candidate id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPool {
    pub question_id: String,
    pub entries: Vec<RankedEntry>,
}

impl RankedPool {
    pub fn from_scores(question_id: impl Into<String>, mut entries: Vec<RankedEntry>) -> Self {
        entries.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.candidate_id.cmp(&b.candidate_id))
        });
        RankedPool {
            question_id: question_id.into(),
            entries,
        }
    }

    /// 1-based ranks of the relevant candidates.
    pub fn relevant_ranks(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.label == 1)
            .map(|(i, _)| i + 1)
    }

    pub fn top_is_relevant(&self) -> bool {
        self.entries.first().is_some_and(|e| e.label == 1)
    }

    /// Mean of precision@rank over the relevant candidates; 0 without any.
    pub fn average_precision(&self) -> f64 {
        let mut hits = 0usize;
        let mut sum = 0.0;
        for rank in self.relevant_ranks() {
            hits += 1;
            sum += hits as f64 / rank as f64;
        }
        if hits == 0 {
            0.0
        } else {
            sum / hits as f64
        }
    }

    pub fn reciprocal_rank(&self) -> f64 {
        self.relevant_ranks().next().map_or(0.0, |r| 1.0 / r as f64)
    }
}

/// Scores every candidate of `example` and sorts them.
pub fn rank_pool(model: &Model, example: &QAExample) -> Result<RankedPool> {
    if example.candidates.is_empty() {
        return Err(Error::Data(format!("question {:?} has no candidates", example.question_id)));
    }
    let q_ids = model.embeddings.ids(&example.question);
    let entries = example
        .candidates
        .iter()
        .map(|c| {
            let score = model
                .score_ids(&q_ids, &model.embeddings.ids(&c.tokens))
                .map_err(|e| {
                    Error::Scoring(format!(
                        "question {:?}, candidate {:?}: {e}",
                        example.question_id, c.id
                    ))
                })?;
            Ok(RankedEntry {
                candidate_id: c.id.clone(),
                score,
                label: c.label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RankedPool::from_scores(example.question_id.clone(), entries))
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut n = 0usize;
    let mut sum = 0.0;
    for v in values {
        n += 1;
        sum += v;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Fraction of questions whose top candidate is relevant (accuracy).
pub fn precision_at_1(pools: &[RankedPool]) -> f64 {
    mean(pools.iter().map(|p| if p.top_is_relevant() { 1.0 } else { 0.0 }))
}

pub fn mean_average_precision(pools: &[RankedPool]) -> f64 {
    mean(pools.iter().map(RankedPool::average_precision))
}

pub fn mean_reciprocal_rank(pools: &[RankedPool]) -> f64 {
    mean(pools.iter().map(RankedPool::reciprocal_rank))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Metrics {
    pub precision_at_1: f64,
    pub map: f64,
    pub mrr: f64,
    pub questions: usize,
}

impl Metrics {
    pub fn from_pools(pools: &[RankedPool]) -> Self {
        Metrics {
            precision_at_1: precision_at_1(pools),
            map: mean_average_precision(pools),
            mrr: mean_reciprocal_rank(pools),
            questions: pools.len(),
        }
    }
}

pub fn rank_all(model: &Model, examples: &[QAExample]) -> Result<Vec<RankedPool>> {
    examples.iter().map(|ex| rank_pool(model, ex)).collect()
}

pub fn evaluate(model: &Model, examples: &[QAExample]) -> Result<Metrics> {
    Ok(Metrics::from_pools(&rank_all(model, examples)?))
}

/// One row of the cumulative answer-length report.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthBucket {
    pub max_length: usize,
    pub accuracy: f64,
    pub questions: usize,
}

/// P@1 restricted to questions whose reference answer (the first relevant
/// candidate) has at most `edge` tokens, for each edge. Buckets without
/// questions are left out.
pub fn accuracy_by_answer_length(
    pools: &[RankedPool],
    examples: &[QAExample],
    bucket_edges: &[usize],
) -> Result<Vec<LengthBucket>> {
    if bucket_edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("length bucket edges must be strictly increasing".into()));
    }
    let lengths: std::collections::HashMap<&str, usize> = examples
        .iter()
        .filter_map(|ex| ex.first_positive().map(|c| (ex.question_id.as_str(), c.tokens.len())))
        .collect();
    let measured: Vec<(usize, bool)> = pools
        .iter()
        .map(|p| {
            lengths
                .get(p.question_id.as_str())
                .map(|&len| (len, p.top_is_relevant()))
                .ok_or_else(|| Error::Data(format!("no reference answer for question {:?}", p.question_id)))
        })
        .collect::<Result<_>>()?;

    Ok(bucket_edges
        .iter()
        .filter_map(|&edge| {
            let inside: Vec<bool> = measured
                .iter()
                .filter(|(len, _)| *len <= edge)
                .map(|(_, ok)| *ok)
                .collect();
            (!inside.is_empty()).then(|| LengthBucket {
                max_length: edge,
                accuracy: inside.iter().filter(|ok| **ok).count() as f64 / inside.len() as f64,
                questions: inside.len(),
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::dataset::Candidate;

    fn pool(qid: &str, entries: &[(&str, f64, u8)]) -> RankedPool {
        RankedPool::from_scores(
            qid,
            entries
                .iter()
                .map(|(id, s, l)| RankedEntry {
                    candidate_id: id.to_string(),
                    score: *s,
                    label: *l,
                })
                .collect(),
        )
    }

    #[test]
    fn sorting_and_ties() {
        let p = pool("q", &[("b", 0.5, 0), ("a", 0.5, 1), ("c", 0.9, 0)]);
        let ids: Vec<&str> = p.entries.iter().map(|e| e.candidate_id.as_str()).collect();
        assert_eq!(ids, vec!["c", "a", "b"]);
        let flat = pool("q", &[("3", 0.0, 0), ("1", 0.0, 0), ("2", 0.0, 1)]);
        let ids: Vec<&str> = flat.entries.iter().map(|e| e.candidate_id.as_str()).collect();
        assert_eq!(ids, vec!["1", "2", "3"]);
    }

    #[test]
    fn precision_at_one_half() {
        let pools = vec![
            pool("q1", &[("a", 0.9, 1), ("b", 0.1, 0)]),
            pool("q2", &[("a", 0.2, 1), ("b", 0.8, 0)]),
        ];
        assert_eq!(precision_at_1(&pools), 0.5);
    }

    #[test]
    fn average_precision_two_relevant() {
        let p = pool("q", &[("a", 0.9, 1), ("b", 0.8, 0), ("c", 0.7, 1), ("d", 0.1, 0)]);
        assert!((p.average_precision() - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn reciprocal_rank_second() {
        let p = pool("q", &[("a", 0.9, 0), ("b", 0.8, 1)]);
        assert_eq!(p.reciprocal_rank(), 0.5);
    }

    #[test]
    fn perfect_ranking() {
        let pools = vec![
            pool("q1", &[("a", 0.9, 1), ("b", 0.1, 0)]),
            pool("q2", &[("a", 0.9, 1), ("b", 0.8, 1), ("c", 0.1, 0)]),
        ];
        let m = Metrics::from_pools(&pools);
        assert_eq!((m.precision_at_1, m.map, m.mrr), (1.0, 1.0, 1.0));
    }

    fn example(qid: &str, answer_len: usize) -> QAExample {
        QAExample {
            question_id: qid.into(),
            question: vec!["q".into()],
            candidates: vec![
                Candidate { id: "neg".into(), tokens: vec!["n".into()], label: 0 },
                Candidate { id: "pos".into(), tokens: vec!["w".into(); answer_len], label: 1 },
            ],
        }
    }

    #[test]
    fn length_buckets() {
        let examples = vec![example("q1", 3), example("q2", 8), example("q3", 12)];
        let pools = vec![
            pool("q1", &[("pos", 0.9, 1), ("neg", 0.1, 0)]),
            pool("q2", &[("pos", 0.1, 1), ("neg", 0.9, 0)]),
            pool("q3", &[("pos", 0.9, 1), ("neg", 0.1, 0)]),
        ];
        let report = accuracy_by_answer_length(&pools, &examples, &[2, 5, 10, 100]).unwrap();
        assert_eq!(
            report,
            vec![
                LengthBucket { max_length: 5, accuracy: 1.0, questions: 1 },
                LengthBucket { max_length: 10, accuracy: 0.5, questions: 2 },
                LengthBucket { max_length: 100, accuracy: 2.0 / 3.0, questions: 3 },
            ]
        );
        let global = accuracy_by_answer_length(&pools, &examples, &[1000]).unwrap();
        assert_eq!(global[0].accuracy, precision_at_1(&pools));
        assert!(accuracy_by_answer_length(&pools, &examples, &[5, 5]).is_err());
    }
}
