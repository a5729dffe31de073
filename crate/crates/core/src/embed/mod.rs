//! Vocabulary, word-embedding tables and word2vec file I/O.

mod vocab;
mod word2vec;

pub use vocab::{build_vocab, EmbeddingTable, Vocabulary, INIT_RANGE, OOV_INDEX, OOV_TOKEN};
pub use word2vec::{
    load_word2vec_binary, load_word2vec_binary_with, load_word2vec_text, load_word2vec_text_with,
    read_word2vec_binary, read_word2vec_text, write_word2vec_binary, write_word2vec_text,
    Word2VecOptions,
};
