//! Attention export as JSON Lines, one record per scored pair.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::dataset::QAExample;
use crate::model::{Model, ModelKind};

pub const ATTENTION_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub version: u32,
    pub model: ModelKind,
    /// Context window of the encoder (1 for biLSTM kinds).
    pub k: usize,
    pub question_id: String,
    pub candidate_id: String,
    pub score: f64,
    pub q_tokens: Vec<String>,
    pub q_weights: Vec<f64>,
    pub a_tokens: Vec<String>,
    pub a_weights: Vec<f64>,
}

/// Attention records for the candidates of `example` (all of them when
/// `candidate_ids` is `None`), in pool order.
pub fn attention_records(
    model: &Model,
    example: &QAExample,
    candidate_ids: Option<&[String]>,
) -> Result<Vec<AttentionRecord>> {
    if !model.kind.is_attentive() {
        return Err(Error::NoAttention(model.kind.to_string()));
    }
    let wanted = |id: &str| candidate_ids.is_none_or(|ids| ids.iter().any(|w| w == id));
    example
        .candidates
        .iter()
        .filter(|c| wanted(&c.id))
        .map(|c| {
            let (score, trace) = model.score_pair(&example.question, &c.tokens)?;
            let trace = trace.ok_or_else(|| Error::NoAttention(model.kind.to_string()))?;
            Ok(AttentionRecord {
                version: ATTENTION_SCHEMA_VERSION,
                model: model.kind,
                k: model.encoder.window(),
                question_id: example.question_id.clone(),
                candidate_id: c.id.clone(),
                score,
                q_tokens: example.question.clone(),
                q_weights: trace.sigma_q,
                a_tokens: c.tokens.clone(),
                a_weights: trace.sigma_a,
            })
        })
        .collect()
}

pub fn write_attention<W: Write>(records: &[AttentionRecord], mut writer: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer
            .write_all(b"\n")
            .map_err(|e| Error::io("<attention export>", e))?;
    }
    writer.flush().map_err(|e| Error::io("<attention export>", e))
}

/// Writes the records of every example in `examples`.
pub fn export_attention<W: Write>(model: &Model, examples: &[QAExample], writer: W) -> Result<usize> {
    let mut records = Vec::new();
    for ex in examples {
        records.extend(attention_records(model, ex, None)?);
    }
    write_attention(&records, writer)?;
    Ok(records.len())
}

pub fn read_attention<R: BufRead>(reader: R) -> Result<Vec<AttentionRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<attention export>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: AttentionRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: "<attention export>".into(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        if record.version != ATTENTION_SCHEMA_VERSION {
            return Err(Error::Version {
                found: record.version,
                expected: ATTENTION_SCHEMA_VERSION,
            });
        }
        if record.q_tokens.len() != record.q_weights.len() || record.a_tokens.len() != record.a_weights.len() {
            return Err(Error::Parse {
                path: "<attention export>".into(),
                line: i + 1,
                msg: "token and weight counts differ".into(),
            });
        }
        out.push(record);
    }
    Ok(out)
}
