//! Pretrained word-embedding tables.
//!
//! Text format: a header line `V D`, then `V` lines of `token v1 … vD`.
//! Binary format (`.bin`): the same header line, then per entry the token,
//! one space, and `D` little-endian `f32` values, optionally followed by a
//! newline.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Fixed embedding table. Row `len()` is the all-zero row used for unknown tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    vocab: HashMap<String, usize>,
    tokens: Vec<String>,
    vectors: Array2<f64>,
    duplicates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Text,
    Binary,
}

impl EmbeddingFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => EmbeddingFormat::Binary,
            _ => EmbeddingFormat::Text,
        }
    }
}

struct Builder {
    dim: usize,
    vocab: HashMap<String, usize>,
    tokens: Vec<String>,
    data: Vec<f64>,
    duplicates: usize,
}

impl Builder {
    fn new(dim: usize, capacity: usize) -> Self {
        Self {
            dim,
            vocab: HashMap::with_capacity(capacity),
            tokens: Vec::with_capacity(capacity),
            data: Vec::with_capacity(capacity * dim),
            duplicates: 0,
        }
    }

    fn push(&mut self, token: String, values: &[f64]) {
        if let Some(&row) = self.vocab.get(&token) {
            log::warn!("duplicate embedding token `{token}`; keeping the last occurrence");
            self.duplicates += 1;
            self.data[row * self.dim..(row + 1) * self.dim].copy_from_slice(values);
        } else {
            self.vocab.insert(token.clone(), self.tokens.len());
            self.tokens.push(token);
            self.data.extend_from_slice(values);
        }
    }

    fn finish(mut self) -> EmbeddingTable {
        let rows = self.tokens.len();
        self.data.extend(std::iter::repeat_n(0.0, self.dim));
        EmbeddingTable {
            vocab: self.vocab,
            tokens: self.tokens,
            vectors: Array2::from_shape_vec((rows + 1, self.dim), self.data).expect("row-major data"),
            duplicates: self.duplicates,
        }
    }
}

fn parse_header(line: &str, line_no: usize) -> Result<(usize, usize)> {
    let mut parts = line.split_whitespace();
    let mut next = |what: &str| {
        parts
            .next()
            .and_then(|p| p.parse::<usize>().ok())
            .ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("header must be `V D`, missing or invalid {what}"),
            })
    };
    let v = next("V")?;
    let d = next("D")?;
    if d == 0 {
        return Err(Error::Format("embedding dimension must be positive".into()));
    }
    Ok((v, d))
}

impl EmbeddingTable {
    /// Build from `(token, vector)` pairs; later duplicates replace earlier ones.
    pub fn from_entries<I>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let mut b = Builder::new(dim, 0);
        for (token, values) in entries {
            if values.len() != dim {
                return Err(Error::Format(format!(
                    "token `{token}` has {} values, expected {dim}",
                    values.len()
                )));
            }
            b.push(token, &values);
        }
        Ok(b.finish())
    }

    /// Number of distinct tokens.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    /// Number of duplicate tokens replaced while loading.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.vocab.get(token).copied()
    }

    pub fn unknown_index(&self) -> usize {
        self.tokens.len()
    }

    /// Embedding of `token`, or the zero row if it is unknown.
    pub fn vector(&self, token: &str) -> ArrayView1<'_, f64> {
        self.vectors.row(self.index_of(token).unwrap_or(self.unknown_index()))
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            msg: "empty embedding file".into(),
        })??;
        let (v, d) = parse_header(&header, 1)?;
        let mut b = Builder::new(d, v);
        let mut values = Vec::with_capacity(d);
        let mut count = 0;
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().expect("non-empty line").to_string();
            values.clear();
            for p in parts {
                values.push(p.parse::<f64>().map_err(|e| Error::Parse {
                    line: line_no,
                    msg: format!("bad value `{p}`: {e}"),
                })?);
            }
            if values.len() != d {
                return Err(Error::Format(format!(
                    "line {line_no}: token `{token}` has {} values, header declares {d}",
                    values.len()
                )));
            }
            b.push(token, &values);
            count += 1;
        }
        if count != v {
            return Err(Error::Format(format!("header declares {v} rows, file has {count}")));
        }
        Ok(b.finish())
    }

    pub fn read_binary<R: BufRead>(mut reader: R) -> Result<Self> {
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let (v, d) = parse_header(&header, 1)?;
        let mut b = Builder::new(d, v);
        let mut buf = vec![0u8; 4 * d];
        let mut values = vec![0.0; d];
        for row in 0..v {
            let mut token = Vec::new();
            reader.read_until(b' ', &mut token)?;
            if token.last() != Some(&b' ') {
                return Err(Error::Format(format!("entry {row}: truncated token")));
            }
            token.pop();
            while matches!(token.first(), Some(b'\n') | Some(b'\r')) {
                token.remove(0);
            }
            let token = String::from_utf8(token).map_err(|e| Error::Format(format!("entry {row}: {e}")))?;
            reader
                .read_exact(&mut buf)
                .map_err(|_| Error::Format(format!("entry {row} (`{token}`): truncated vector")))?;
            for (v, c) in values.iter_mut().zip(buf.chunks_exact(4)) {
                *v = f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64;
            }
            b.push(token, &values);
        }
        Ok(b.finish())
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim())?;
        for (k, token) in self.tokens.iter().enumerate() {
            write!(w, "{token}")?;
            for v in self.vectors.row(k) {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Values are narrowed to `f32`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim())?;
        for (k, token) in self.tokens.iter().enumerate() {
            w.write_all(token.as_bytes())?;
            w.write_all(b" ")?;
            for &v in self.vectors.row(k) {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let w = BufWriter::new(File::create(path)?);
        match EmbeddingFormat::from_path(path) {
            EmbeddingFormat::Text => self.write_text(w),
            EmbeddingFormat::Binary => self.write_binary(w),
        }
    }
}

/// Load an embedding file; `.bin` files use the binary variant.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    match EmbeddingFormat::from_path(path) {
        EmbeddingFormat::Text => EmbeddingTable::read_text(reader),
        EmbeddingFormat::Binary => EmbeddingTable::read_binary(reader),
    }
}
