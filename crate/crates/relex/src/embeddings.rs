//! Static word-embedding store with span pooling, vicinity-window extraction,
//! and cosine similarity.
//!
//! Lookups are case-folded. Unknown tokens map to the zero vector, which keeps
//! every pooling operation total and neutral under mean pooling.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::corpus::{tokenize, Document, EntityChunk};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
    zero: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        Ok(EmbeddingTable {
            dim,
            entries: HashMap::new(),
            zero: vec![0.0; dim],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Insert a vector under the case-folded key; replaces earlier entries.
    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimMismatch(format!(
                "vector for {word:?} has {} components, table dim is {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite component in vector for {word:?}")));
        }
        self.entries.insert(word.to_lowercase(), vector);
        Ok(())
    }

    /// Vector for the case-folded token; the zero vector when unknown.
    pub fn lookup(&self, token: &str) -> &[f64] {
        self.entries
            .get(&token.to_lowercase())
            .map(|v| v.as_slice())
            .unwrap_or(&self.zero)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(&token.to_lowercase())
    }
}

/// Load a word2vec-style text file: one `word v1 v2 … vd` line per entry,
/// optionally preceded by a `count dim` header line.
pub fn load_text_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let content = fs::read_to_string(path)?;
    parse_text_embeddings(&content, &path.display().to_string())
}

pub fn parse_text_embeddings(content: &str, source: &str) -> Result<EmbeddingTable> {
    let mut dim: Option<usize> = None;
    let mut table: Option<EmbeddingTable> = None;
    let mut first_data_line = true;

    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        // A first line of exactly two integers is the `count dim` header.
        if first_data_line && fields.len() == 2 {
            if let (Ok(_count), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                if d == 0 {
                    return Err(Error::parse(source, line_no, "header declares dimension 0"));
                }
                dim = Some(d);
                first_data_line = false;
                continue;
            }
        }
        first_data_line = false;
        let word = fields[0];
        let values = fields[1..]
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    Error::parse(source, line_no, format!("invalid number {f:?}"))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(source, line_no, "non-finite component"));
        }
        match dim {
            None => {
                if values.is_empty() {
                    return Err(Error::parse(source, line_no, "entry has no components"));
                }
                dim = Some(values.len());
            }
            Some(d) => {
                if values.len() != d {
                    return Err(Error::EmbeddingDim {
                        line: line_no,
                        expected: d,
                        found: values.len(),
                    });
                }
            }
        }
        let t = match table.as_mut() {
            Some(t) => t,
            None => {
                table = Some(EmbeddingTable::new(dim.expect("dim set above"))?);
                table.as_mut().expect("just set")
            }
        };
        t.insert(word, values)?;
    }

    table.ok_or_else(|| Error::invalid(format!("{source}: no embedding entries")))
}

/// Arithmetic mean of the chunk's token vectors.
pub fn span_embedding(table: &EmbeddingTable, doc: &Document, chunk: &EntityChunk) -> Vec<f64> {
    mean_vectors(
        chunk
            .token_range
            .clone()
            .map(|i| table.lookup(&doc.tokens[i].text)),
        table.dim(),
    )
}

/// Mean of the given token texts' vectors; used for free-text queries.
pub fn embed_text(table: &EmbeddingTable, text: &str) -> Vec<f64> {
    let (tokens, _) = tokenize(text);
    mean_vectors(tokens.iter().map(|t| table.lookup(&t.text)), table.dim())
}

pub(crate) fn mean_vectors<'a>(
    vectors: impl Iterator<Item = &'a [f64]>,
    dim: usize,
) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    let mut count = 0usize;
    for v in vectors {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
        count += 1;
    }
    if count > 0 {
        for a in &mut acc {
            *a /= count as f64;
        }
    }
    acc
}

/// Vectors of the `window` tokens left of the chunk (nearest last) and the
/// `window` tokens right of it (nearest first), zero-padded at document
/// boundaries. Chunk tokens are never included. Always `2 * window` vectors.
pub fn vicinity_embeddings(
    table: &EmbeddingTable,
    doc: &Document,
    chunk: &EntityChunk,
    window: usize,
) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * window);
    let start = chunk.token_range.start;
    let end = chunk.token_range.end;
    for offset in (1..=window).rev() {
        if start >= offset {
            out.push(table.lookup(&doc.tokens[start - offset].text).to_vec());
        } else {
            out.push(vec![0.0; table.dim()]);
        }
    }
    for offset in 0..window {
        let idx = end + offset;
        if idx < doc.tokens.len() {
            out.push(table.lookup(&doc.tokens[idx].text).to_vec());
        } else {
            out.push(vec![0.0; table.dim()]);
        }
    }
    out
}

/// Cosine similarity, defined as 0 when either vector has zero norm.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimMismatch(format!(
            "cosine of vectors with dims {} and {}",
            u.len(),
            v.len()
        )));
    }
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (nu.sqrt() * nv.sqrt()))
}
