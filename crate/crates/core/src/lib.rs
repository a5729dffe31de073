//! Answer selection with attentive pooling networks.
//!
//! Four scoring architectures share one pipeline (embed, encode, pool,
//! cosine): QA-CNN and QA-biLSTM pool each side independently with a
//! max-over-time, while AP-CNN and AP-biLSTM pool both sides with
//! attention vectors derived from a learned bilinear soft alignment
//! between question and answer positions.

pub mod error;
pub mod cli;
pub mod embed;
pub mod encoders;
pub mod eval;
pub mod model;
pub mod numcore;
pub mod pooling;
pub mod training;

pub use error::{Error, Result};
