//! Readers and writers for the word2vec text and binary formats.
//!
//! Text: a `count dim` header line, then one `token v1 ... vd` line per
//! word. Binary: an ASCII `count dim\n` header, then per word the token
//! bytes, a single space, `dim` little-endian `f32` values, and an optional
//! newline.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::vocab::EmbeddingTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Word2VecOptions {
    /// Lowercase tokens on ingestion. Later duplicates are dropped.
    pub lowercase: bool,
    /// Seed for the randomly initialised OOV column.
    pub oov_seed: u64,
}

pub fn load_word2vec_text(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    load_word2vec_text_with(path, &Word2VecOptions::default())
}

pub fn load_word2vec_text_with(
    path: impl AsRef<Path>,
    opts: &Word2VecOptions,
) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_word2vec_text(BufReader::new(file), &path.display().to_string(), opts)
}

/// Parses the text format. `source` names the input in error messages.
pub fn read_word2vec_text<R: BufRead>(
    reader: R,
    source: &str,
    opts: &Word2VecOptions,
) -> Result<EmbeddingTable> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: source.to_string(),
        line,
        msg,
    };
    let mut lines = reader.lines().enumerate();
    let (count, dim) = match lines.next() {
        Some((_, line)) => {
            let line = line.map_err(|e| Error::io(source, e))?;
            parse_header(&line).ok_or_else(|| {
                parse_err(1, format!("expected header \"count dim\", got {line:?}"))
            })?
        }
        None => return Err(parse_err(1, "empty file".into())),
    };

    let mut entries = Vec::with_capacity(count);
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if entries.len() == count {
            return Err(parse_err(
                line_no,
                format!("more rows than the {count} announced in the header"),
            ));
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().unwrap_or_default();
        let values = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| parse_err(line_no, format!("invalid number {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != dim {
            return Err(parse_err(
                line_no,
                format!("expected {dim} values, found {}", values.len()),
            ));
        }
        entries.push((normalize(token, opts), values));
    }
    if entries.len() != count {
        return Err(Error::Data(format!(
            "{source}: header announces {count} rows, found {}",
            entries.len()
        )));
    }
    EmbeddingTable::from_vectors(entries, dim, opts.oov_seed)
}

pub fn load_word2vec_binary(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    load_word2vec_binary_with(path, &Word2VecOptions::default())
}

pub fn load_word2vec_binary_with(
    path: impl AsRef<Path>,
    opts: &Word2VecOptions,
) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_word2vec_binary(BufReader::new(file), opts)
}

/// Parses the binary format. Each `f32` is widened to `f64` exactly.
pub fn read_word2vec_binary<R: BufRead>(reader: R, opts: &Word2VecOptions) -> Result<EmbeddingTable> {
    let mut cur = OffsetReader { inner: reader, offset: 0 };

    let header = cur.read_until(b'\n', "header")?;
    let header = String::from_utf8_lossy(&header);
    let (count, dim) = parse_header(header.trim_end_matches('\n')).ok_or_else(|| Error::Parse {
        path: "<binary>".into(),
        line: 1,
        msg: format!("expected header \"count dim\", got {:?}", header.trim_end()),
    })?;

    let mut entries = Vec::with_capacity(count);
    let mut raw = vec![0u8; 4 * dim];
    for _ in 0..count {
        cur.skip_newlines()?;
        let mut token = cur.read_until(b' ', "token")?;
        token.pop();
        let token = String::from_utf8_lossy(&token).into_owned();
        cur.read_full(&mut raw, "vector")?;
        let values = raw
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        entries.push((normalize(&token, opts), values));
    }
    EmbeddingTable::from_vectors(entries, dim, opts.oov_seed)
}

/// Writes every non-OOV column in text format with round-trip `f64`
/// formatting.
pub fn write_word2vec_text<W: Write>(table: &EmbeddingTable, writer: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{} {}", table.vocab_size() - 1, table.dim())?;
    for (i, token) in table.vocab.tokens().iter().enumerate().skip(1) {
        write!(w, "{token}")?;
        for v in table.column(i) {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    w.flush()
}

/// Writes every non-OOV column in binary format. Values are narrowed to
/// `f32`.
pub fn write_word2vec_binary<W: Write>(table: &EmbeddingTable, writer: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{} {}", table.vocab_size() - 1, table.dim())?;
    for (i, token) in table.vocab.tokens().iter().enumerate().skip(1) {
        w.write_all(token.as_bytes())?;
        w.write_all(b" ")?;
        for v in table.column(i) {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut it = line.split_whitespace();
    let count = it.next()?.parse().ok()?;
    let dim: usize = it.next()?.parse().ok()?;
    if it.next().is_some() || dim == 0 {
        return None;
    }
    Some((count, dim))
}

fn normalize(token: &str, opts: &Word2VecOptions) -> String {
    if opts.lowercase {
        token.to_lowercase()
    } else {
        token.to_string()
    }
}

/// Byte reader that tracks its absolute position for error reporting.
struct OffsetReader<R> {
    inner: R,
    offset: u64,
}

impl<R: BufRead> OffsetReader<R> {
    fn truncated(&self, what: &str) -> Error {
        Error::Truncated {
            offset: self.offset,
            msg: format!("unexpected end of file while reading {what}"),
        }
    }

    fn io(&self, e: std::io::Error) -> Error {
        Error::io(format!("<binary @ {}>", self.offset), e)
    }

    /// Reads through `delim` inclusive; EOF before `delim` is a truncation.
    fn read_until(&mut self, delim: u8, what: &str) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        let n = self.inner.read_until(delim, &mut buf).map_err(|e| self.io(e))?;
        self.offset += n as u64;
        if buf.last() != Some(&delim) {
            return Err(self.truncated(what));
        }
        Ok(buf)
    }

    fn read_full(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        let mut filled = 0;
        while filled < buf.len() {
            let n = self.inner.read(&mut buf[filled..]).map_err(|e| self.io(e))?;
            if n == 0 {
                return Err(self.truncated(what));
            }
            filled += n;
            self.offset += n as u64;
        }
        Ok(())
    }

    fn skip_newlines(&mut self) -> Result<()> {
        loop {
            let offset = self.offset;
            let buf = self
                .inner
                .fill_buf()
                .map_err(|e| Error::io(format!("<binary @ {offset}>"), e))?;
            match buf.first() {
                Some(b'\n') => {
                    self.inner.consume(1);
                    self.offset += 1;
                }
                _ => return Ok(()),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::OOV_INDEX;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn text(input: &str) -> Result<EmbeddingTable> {
        read_word2vec_text(input.as_bytes(), "mem", &Word2VecOptions::default())
    }

    fn binary_bytes(entries: &[(&str, Vec<f32>)], dim: usize) -> Vec<u8> {
        let mut out = format!("{} {dim}\n", entries.len()).into_bytes();
        for (tok, v) in entries {
            out.extend_from_slice(tok.as_bytes());
            out.push(b' ');
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
            out.push(b'\n');
        }
        out
    }

    #[test]
    fn text_header_and_rows() {
        let t = text("2 3\nthe 0.1 0.2 0.3\ncat -1 0 2.5\n").unwrap();
        assert_eq!(t.vocab_size(), 3);
        assert_eq!(t.dim(), 3);
        assert_eq!(t.vector("cat"), vec![-1.0, 0.0, 2.5]);
    }

    #[test]
    fn text_short_row_reports_line() {
        let err = text("2 3\nthe 0.1 0.2 0.3\ncat -1 0\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn text_bad_number_and_header() {
        assert!(matches!(text("1 2\na 1 x\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(text("two 3\n"), Err(Error::Parse { line: 1, .. })));
        assert!(text("3 1\na 1\n").is_err());
    }

    #[test]
    fn text_lowercase_keeps_first() {
        let opts = Word2VecOptions { lowercase: true, oov_seed: 0 };
        let t = read_word2vec_text("2 1\nThe 1\nthe 2\n".as_bytes(), "mem", &opts).unwrap();
        assert_eq!(t.vocab_size(), 2);
        assert_eq!(t.vector("the"), vec![1.0]);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let entries: Vec<(String, Vec<f64>)> = (0..40)
            .map(|i| (format!("w{i}"), (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect()))
            .collect();
        let table = EmbeddingTable::from_vectors(entries.clone(), 5, 0).unwrap();
        let mut buf = Vec::new();
        write_word2vec_text(&table, &mut buf).unwrap();
        let back = text(std::str::from_utf8(&buf).unwrap()).unwrap();
        for (tok, v) in &entries {
            assert_eq!(&back.vector(tok), v);
        }
    }

    #[test]
    fn binary_minimal_file() {
        let bytes = binary_bytes(&[("x", vec![1.0, -0.5])], 2);
        let t = read_word2vec_binary(&bytes[..], &Word2VecOptions::default()).unwrap();
        assert_eq!(t.vocab_size(), 2);
        assert_eq!(t.vector("x"), vec![1.0, -0.5]);
        assert_ne!(t.vocab.lookup("x"), OOV_INDEX);
    }

    #[test]
    fn binary_without_trailing_newlines() {
        let mut bytes = b"2 1\n".to_vec();
        bytes.extend_from_slice(b"a ");
        bytes.extend_from_slice(&1.5f32.to_le_bytes());
        bytes.extend_from_slice(b"b ");
        bytes.extend_from_slice(&(-2.0f32).to_le_bytes());
        let t = read_word2vec_binary(&bytes[..], &Word2VecOptions::default()).unwrap();
        assert_eq!(t.vector("a"), vec![1.5]);
        assert_eq!(t.vector("b"), vec![-2.0]);
    }

    #[test]
    fn binary_truncation_reports_offset() {
        let bytes = binary_bytes(&[("ab", vec![1.0, 2.0, 3.0])], 3);
        // header "1 3\n" (4 bytes) + "ab " (3 bytes) + 12 value bytes + newline
        let cut = &bytes[..4 + 3 + 6];
        match read_word2vec_binary(cut, &Word2VecOptions::default()) {
            Err(Error::Truncated { offset, .. }) => assert_eq!(offset, 13),
            other => panic!("unexpected {other:?}"),
        }
        match read_word2vec_binary(&bytes[..5], &Word2VecOptions::default()) {
            Err(Error::Truncated { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn binary_bad_header() {
        assert!(matches!(
            read_word2vec_binary(&b"x y\n"[..], &Word2VecOptions::default()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn binary_round_trip_hundred_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let entries: Vec<(String, Vec<f32>)> = (0..100)
            .map(|i| (format!("tok{i}"), (0..7).map(|_| rng.gen_range(-1.0f32..1.0)).collect()))
            .collect();
        let table = EmbeddingTable::from_vectors(
            entries
                .iter()
                .map(|(t, v)| (t.clone(), v.iter().map(|x| f64::from(*x)).collect())),
            7,
            0,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_word2vec_binary(&table, &mut buf).unwrap();
        let back = read_word2vec_binary(&buf[..], &Word2VecOptions::default()).unwrap();
        assert_eq!(back.vocab, table.vocab);
        for (tok, v) in &entries {
            let got = back.vector(tok);
            for (a, b) in got.iter().zip(v) {
                assert_eq!(a.to_bits(), f64::from(*b).to_bits());
            }
        }
    }
}
