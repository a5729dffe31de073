use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numcore::Mat;

/// Display name of the shared out-of-vocabulary slot.
pub const OOV_TOKEN: &str = "<unk>";

/// Index of the OOV slot in every vocabulary.
pub const OOV_INDEX: usize = 0;

/// Half-width of the uniform range used for randomly initialised columns.
pub const INIT_RANGE: f64 = 0.1;

/// Dense token index. Slot 0 is always the OOV entry; it is not reachable
/// through [`Vocabulary::get`], so a file that happens to contain the string
/// `<unk>` still gets its own column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        Vocabulary {
            tokens: vec![OOV_TOKEN.to_string()],
            index: HashMap::new(),
        }
    }

    /// Rebuilds a vocabulary from its tokens in index order (slot 0 first).
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Data("vocabulary needs at least the OOV slot".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate().skip(1) {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    /// Adds `token` if missing and returns its index.
    pub fn insert(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        let i = self.tokens.len();
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), i);
        i
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Index of `token`, falling back to the OOV slot.
    pub fn lookup(&self, token: &str) -> usize {
        self.get(token).unwrap_or(OOV_INDEX)
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Vocabulary plus the `d x |V|` embedding matrix whose columns are the
/// word vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub vocab: Vocabulary,
    pub w0: Mat,
    /// Whether training updates `w0`. Frozen by default.
    pub trainable: bool,
}

impl EmbeddingTable {
    pub fn new(vocab: Vocabulary, w0: Mat) -> Result<Self> {
        if w0.cols() != vocab.len() {
            return Err(Error::Contract(format!(
                "embedding matrix has {} columns for a vocabulary of {}",
                w0.cols(),
                vocab.len()
            )));
        }
        Ok(EmbeddingTable {
            vocab,
            w0,
            trainable: false,
        })
    }

    /// Builds a table from `(token, vector)` pairs. The first occurrence of a
    /// repeated token wins. The OOV column is drawn uniformly from
    /// `[-0.1, 0.1]` with `oov_seed`.
    pub fn from_vectors(
        entries: impl IntoIterator<Item = (String, Vec<f64>)>,
        dim: usize,
        oov_seed: u64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be >= 1".into()));
        }
        let mut vocab = Vocabulary::new();
        let mut rng = ChaCha8Rng::seed_from_u64(oov_seed);
        let mut columns = vec![uniform_column(&mut rng, dim)];
        for (token, vector) in entries {
            if vector.len() != dim {
                return Err(Error::Contract(format!(
                    "vector for {token:?} has {} values, expected {dim}",
                    vector.len()
                )));
            }
            if vocab.get(&token).is_some() {
                continue;
            }
            vocab.insert(&token);
            columns.push(vector);
        }
        let w0 = Mat::from_columns(&columns)?;
        EmbeddingTable::new(vocab, w0)
    }

    pub fn dim(&self) -> usize {
        self.w0.rows()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn column(&self, index: usize) -> Vec<f64> {
        self.w0.col(index)
    }

    /// Vector for `token`, or the OOV vector.
    pub fn vector(&self, token: &str) -> Vec<f64> {
        self.column(self.vocab.lookup(token))
    }

    pub fn ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.vocab.lookup(t.as_ref())).collect()
    }

    /// `d x T` matrix whose column `t` is the embedding of `tokens[t]`.
    pub fn lookup_sequence<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Mat> {
        self.lookup_ids(&self.ids(tokens))
    }

    pub fn lookup_ids(&self, ids: &[usize]) -> Result<Mat> {
        if ids.is_empty() {
            return Err(Error::Contract("cannot embed an empty token sequence".into()));
        }
        let d = self.dim();
        let mut out = Mat::zeros(d, ids.len());
        for (t, &id) in ids.iter().enumerate() {
            if id >= self.vocab_size() {
                return Err(Error::Contract(format!(
                    "token id {id} outside vocabulary of {}",
                    self.vocab_size()
                )));
            }
            for r in 0..d {
                out[(r, t)] = self.w0[(r, id)];
            }
        }
        Ok(out)
    }
}

fn uniform_column(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-INIT_RANGE..=INIT_RANGE)).collect()
}

/// Builds the training vocabulary from a token stream.
///
/// Tokens are indexed in first-seen order after the OOV slot. Tokens found
/// in `pretrained` copy its vector; the OOV slot and every other token get
/// a fresh uniform `[-0.1, 0.1]` column drawn in index order from `seed`.
pub fn build_vocab<'a>(
    corpus: impl IntoIterator<Item = &'a str>,
    pretrained: Option<&EmbeddingTable>,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingTable> {
    if dim == 0 {
        return Err(Error::Config("embedding dimension must be >= 1".into()));
    }
    if let Some(p) = pretrained {
        if p.dim() != dim {
            return Err(Error::Config(format!(
                "pretrained embeddings have dimension {}, configured {dim}",
                p.dim()
            )));
        }
    }
    let mut vocab = Vocabulary::new();
    for token in corpus {
        vocab.insert(token);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w0 = Mat::zeros(dim, vocab.len());
    for (i, token) in vocab.tokens().iter().enumerate() {
        let known = if i == OOV_INDEX {
            None
        } else {
            pretrained.and_then(|p| p.vocab.get(token).map(|j| p.column(j)))
        };
        let column = known.unwrap_or_else(|| uniform_column(&mut rng, dim));
        w0.set_col(i, &column);
    }
    EmbeddingTable::new(vocab, w0)
}
