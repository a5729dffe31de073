//! Checkpoint container.
//!
//! ```text
//! magic      8 bytes   "APNETCKP"
//! version    u32 LE
//! length     u64 LE    manifest byte length
//! manifest   JSON      config, epoch, RNG state, vocabulary, tensor table
//! payload    f64 LE    tensors in table order, row-major
//! checksum   32 bytes  SHA-256 of everything above
//! ```

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TrainingConfig;
use crate::embed::{EmbeddingTable, Vocabulary};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numcore::{Mat, ParamSet};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"APNETCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

const HEADER_LEN: usize = 8 + 4 + 8;
const DIGEST_LEN: usize = 32;
const EMBEDDING_TENSOR: &str = "embedding.w0";

/// Position of a ChaCha8 stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    /// 32-byte key as lowercase hex.
    pub seed: String,
    pub stream: u64,
    /// Word position, decimal (it is 68 bits wide).
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        RngState {
            seed: rng.get_seed().iter().map(|b| format!("{b:02x}")).collect(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng> {
        let bad = || Error::Data("malformed RNG state in checkpoint".into());
        if self.seed.len() != 64 || !self.seed.is_ascii() {
            return Err(bad());
        }
        let mut seed = [0u8; 32];
        for (i, byte) in seed.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&self.seed[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
        }
        let word_pos: u128 = self.word_pos.parse().map_err(|_| bad())?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(word_pos);
        Ok(rng)
    }
}

/// Everything needed to score with, or resume training of, a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainingConfig,
    pub model: Model,
    /// Completed epochs.
    pub epoch: usize,
    pub rng: RngState,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    config: TrainingConfig,
    epoch: usize,
    rng: RngState,
    vocabulary: Vec<String>,
    tensors: Vec<TensorEntry>,
}

/// Every parameter tensor, the embedding matrix included even when frozen.
fn all_tensors(model: &Model) -> Vec<(String, &Mat)> {
    let mut out = model.tensors();
    if !model.embeddings.trainable {
        out.push((EMBEDDING_TENSOR.into(), &model.embeddings.w0));
    }
    out
}

pub fn write_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let tensors = all_tensors(&ckpt.model);
    let manifest = Manifest {
        config: ckpt.config.clone(),
        epoch: ckpt.epoch,
        rng: ckpt.rng.clone(),
        vocabulary: ckpt.model.embeddings.vocab.tokens().to_vec(),
        tensors: tensors
            .iter()
            .map(|(name, m)| TensorEntry {
                name: name.clone(),
                rows: m.rows(),
                cols: m.cols(),
            })
            .collect(),
    };
    let manifest = serde_json::to_vec(&manifest)?;
    let payload_len: usize = tensors.iter().map(|(_, m)| m.len() * 8).sum();

    let mut out = Vec::with_capacity(HEADER_LEN + manifest.len() + payload_len + DIGEST_LEN);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(&manifest);
    for (_, m) in &tensors {
        for v in m.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < HEADER_LEN + DIGEST_LEN {
        return Err(Error::Truncated {
            offset: bytes.len() as u64,
            msg: "checkpoint shorter than its fixed header".into(),
        });
    }
    if &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Data("not a checkpoint file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Checksum);
    }

    let manifest_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    let manifest_end = usize::try_from(manifest_len)
        .ok()
        .and_then(|n| n.checked_add(HEADER_LEN))
        .filter(|&end| end <= body.len())
        .ok_or_else(|| Error::Truncated {
            offset: body.len() as u64,
            msg: "manifest runs past the end of the file".into(),
        })?;
    let manifest: Manifest = serde_json::from_slice(&body[HEADER_LEN..manifest_end])?;
    manifest.config.validate()?;

    let mut payload = &body[manifest_end..];
    let mut tensors = Vec::with_capacity(manifest.tensors.len());
    for entry in &manifest.tensors {
        let n = entry.rows.saturating_mul(entry.cols);
        let bytes_needed = n.checked_mul(8).filter(|&b| b <= payload.len()).ok_or_else(|| {
            Error::Truncated {
                offset: (body.len() - payload.len()) as u64,
                msg: format!("payload for {} is incomplete", entry.name),
            }
        })?;
        let (chunk, rest) = payload.split_at(bytes_needed);
        payload = rest;
        let data = chunk
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        tensors.push((entry.name.clone(), Mat::new(entry.rows, entry.cols, data)?));
    }
    if !payload.is_empty() {
        return Err(Error::Data(format!("{} unexpected payload bytes", payload.len())));
    }

    let model = rebuild_model(&manifest, tensors)?;
    Ok(Checkpoint {
        config: manifest.config,
        model,
        epoch: manifest.epoch,
        rng: manifest.rng,
    })
}

fn rebuild_model(manifest: &Manifest, mut tensors: Vec<(String, Mat)>) -> Result<Model> {
    let cfg = &manifest.config;
    let vocab = Vocabulary::from_tokens(manifest.vocabulary.clone())?;
    let take = |tensors: &mut Vec<(String, Mat)>, name: &str| -> Result<Mat> {
        let i = tensors
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::Data(format!("checkpoint lacks tensor {name}")))?;
        Ok(tensors.swap_remove(i).1)
    };

    let w0 = take(&mut tensors, EMBEDDING_TENSOR)?;
    let mut embeddings = EmbeddingTable::new(vocab, w0)?;
    embeddings.trainable = cfg.embeddings_trainable;

    // Shape skeleton from the config, then overwrite every tensor by name.
    let skeleton_emb = EmbeddingTable::new(embeddings.vocab.clone(), Mat::zeros(cfg.dim, embeddings.vocab_size()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut model = Model::init(cfg.model, skeleton_emb, cfg.width, cfg.window, &mut rng)?;
    model.embeddings = embeddings;
    for (name, slot) in model.tensors_mut() {
        if name == EMBEDDING_TENSOR {
            continue;
        }
        let m = take(&mut tensors, &name)?;
        if m.shape() != slot.shape() {
            return Err(Error::Data(format!(
                "tensor {name} is {}x{}, config implies {}x{}",
                m.rows(),
                m.cols(),
                slot.rows(),
                slot.cols()
            )));
        }
        *slot = m;
    }
    if let Some((name, _)) = tensors.first() {
        return Err(Error::Data(format!("unexpected tensor {name} in checkpoint")));
    }
    Ok(model)
}

pub fn checkpoint_save(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let bytes = write_checkpoint(ckpt)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn checkpoint_load(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}
