#![allow(dead_code)]

use apnet::embed::{build_vocab, EmbeddingTable};
use apnet::eval::{Candidate, QAExample};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FILLER: [&str; 12] = [
    "the", "a", "of", "is", "to", "you", "can", "will", "and", "for", "it", "be",
];
const QUESTION_WORDS: [&str; 4] = ["what", "how", "does", "why"];

pub const TOY_QUESTIONS: usize = 20;
pub const TOY_CANDIDATES: usize = 10;

fn content(q: usize) -> [String; 3] {
    [format!("topic{q}a"), format!("topic{q}b"), format!("topic{q}c")]
}

fn filler(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    (0..n).map(|_| FILLER[rng.gen_range(0..FILLER.len())].to_string()).collect()
}

/// An answer about topic `q`: two of its content words among filler.
fn answer_about(rng: &mut ChaCha8Rng, q: usize) -> Vec<String> {
    let c = content(q);
    let n = rng.gen_range(3..=6);
    let mut words = filler(rng, n);
    words.push(c[0].clone());
    words.push(c[1 + rng.gen_range(0..2)].clone());
    words.shuffle(rng);
    words
}

/// 20 questions with 10 candidates each. Each question mentions the three
/// content words of its own topic; its one positive shares at least two of
/// them, and its nine negatives are answers about other topics, sharing
/// none.
pub fn toy_corpus(seed: u64) -> Vec<QAExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..TOY_QUESTIONS)
        .map(|q| {
            let mut question = vec![QUESTION_WORDS[q % QUESTION_WORDS.len()].to_string()];
            question.extend(content(q));
            question.extend(filler(&mut rng, 2));
            let positive_slot = rng.gen_range(0..TOY_CANDIDATES);
            let mut others: Vec<usize> = (0..TOY_QUESTIONS).filter(|&o| o != q).collect();
            others.shuffle(&mut rng);
            let candidates = (0..TOY_CANDIDATES)
                .map(|slot| {
                    let (topic, label) = if slot == positive_slot {
                        (q, 1)
                    } else {
                        (others[slot - usize::from(slot > positive_slot)], 0)
                    };
                    Candidate {
                        id: format!("c{slot}"),
                        tokens: answer_about(&mut rng, topic),
                        label,
                    }
                })
                .collect();
            QAExample {
                question_id: format!("q{q:02}"),
                question,
                candidates,
            }
        })
        .collect()
}

pub fn corpus_embeddings(data: &[QAExample], dim: usize, seed: u64) -> EmbeddingTable {
    let tokens = data.iter().flat_map(|e| {
        e.question
            .iter()
            .chain(e.candidates.iter().flat_map(|c| c.tokens.iter()))
            .map(String::as_str)
    });
    build_vocab(tokens, None, dim, seed).unwrap()
}

/// Stand-in for pretrained vectors: every column uniform in `[-1, 1]`.
pub fn toy_pretrained(data: &[QAExample], dim: usize, seed: u64) -> EmbeddingTable {
    let mut table = corpus_embeddings(data, dim, seed);
    table.w0.scale(1.0 / apnet::embed::INIT_RANGE);
    table
}

/// Random pool-tsv style data with `n_questions` questions.
pub fn random_dataset(seed: u64, n_questions: usize) -> Vec<QAExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words: Vec<String> = (0..50).map(|i| format!("w{i}")).collect();
    let sentence = |rng: &mut ChaCha8Rng| -> Vec<String> {
        (0..rng.gen_range(1..12)).map(|_| words[rng.gen_range(0..words.len())].clone()).collect()
    };
    (0..n_questions)
        .map(|q| {
            let n = rng.gen_range(1..=15);
            let pos = rng.gen_range(0..n);
            QAExample {
                question_id: format!("Q{q}"),
                question: sentence(&mut rng),
                candidates: (0..n)
                    .map(|c| Candidate {
                        id: format!("A{c}"),
                        tokens: sentence(&mut rng),
                        label: u8::from(c == pos || rng.gen_bool(0.15)),
                    })
                    .collect(),
            }
        })
        .collect()
}
