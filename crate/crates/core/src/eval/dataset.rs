//! The `pool-tsv` dataset format.
//!
//! One record per line, five tab-separated fields:
//!
//! ```text
//! question_id <TAB> candidate_id <TAB> label <TAB> question tokens <TAB> answer tokens
//! ```
//!
//! Tokens are space separated, labels are `0` or `1`. Records sharing a
//! `question_id` form one example, in first-seen order.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub id: String,
    pub tokens: Vec<String>,
    pub label: u8,
}

impl Candidate {
    pub fn is_relevant(&self) -> bool {
        self.label == 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QAExample {
    pub question_id: String,
    pub question: Vec<String>,
    pub candidates: Vec<Candidate>,
}

impl QAExample {
    pub fn has_positive(&self) -> bool {
        self.candidates.iter().any(Candidate::is_relevant)
    }

    /// First relevant candidate, the reference answer for length bucketing.
    pub fn first_positive(&self) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.is_relevant())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadMode {
    Train,
    /// Also rejects questions without any relevant candidate.
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    pub mode: LoadMode,
    pub lowercase: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            mode: LoadMode::Train,
            lowercase: false,
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Vec<QAExample>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(BufReader::new(file), &path.display().to_string(), opts)
}

pub fn read_dataset<R: BufRead>(reader: R, source: &str, opts: &LoadOptions) -> Result<Vec<QAExample>> {
    let err = |line: usize, msg: String| Error::Parse {
        path: source.to_string(),
        line,
        msg,
    };
    let tokenize = |s: &str| -> Vec<String> {
        s.split_whitespace()
            .map(|t| if opts.lowercase { t.to_lowercase() } else { t.to_string() })
            .collect()
    };

    let mut examples: Vec<QAExample> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    let mut seen: Vec<HashSet<String>> = Vec::new();

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(err(line_no, format!("expected 5 tab-separated fields, found {}", fields.len())));
        }
        let (qid, cid) = (fields[0], fields[1]);
        if qid.is_empty() || cid.is_empty() {
            return Err(err(line_no, "empty question or candidate id".into()));
        }
        let label = match fields[2] {
            "0" => 0,
            "1" => 1,
            other => return Err(err(line_no, format!("label must be 0 or 1, got {other:?}"))),
        };
        let question = tokenize(fields[3]);
        let answer = tokenize(fields[4]);
        if question.is_empty() || answer.is_empty() {
            return Err(err(line_no, "empty question or answer text".into()));
        }

        let idx = match by_id.get(qid) {
            Some(&idx) => {
                if examples[idx].question != question {
                    return Err(err(line_no, format!("question {qid:?} repeated with different text")));
                }
                idx
            }
            None => {
                by_id.insert(qid.to_string(), examples.len());
                examples.push(QAExample {
                    question_id: qid.to_string(),
                    question,
                    candidates: Vec::new(),
                });
                seen.push(HashSet::new());
                examples.len() - 1
            }
        };
        if !seen[idx].insert(cid.to_string()) {
            return Err(err(line_no, format!("duplicate candidate {cid:?} for question {qid:?}")));
        }
        examples[idx].candidates.push(Candidate {
            id: cid.to_string(),
            tokens: answer,
            label,
        });
    }

    if opts.mode == LoadMode::Eval {
        if let Some(ex) = examples.iter().find(|e| !e.has_positive()) {
            return Err(Error::Data(format!(
                "{source}: question {:?} has no relevant candidate",
                ex.question_id
            )));
        }
    }
    Ok(examples)
}

pub fn write_dataset<W: Write>(examples: &[QAExample], writer: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    for ex in examples {
        let q = ex.question.join(" ");
        for c in &ex.candidates {
            writeln!(w, "{}\t{}\t{}\t{}\t{}", ex.question_id, c.id, c.label, q, c.tokens.join(" "))?;
        }
    }
    w.flush()
}
