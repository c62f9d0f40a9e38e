//! Feature assembly for one candidate pair: similarity, normalized syntactic
//! distance, dependency-path embeddings, span embeddings, and vicinity
//! embeddings, vertically stacked into a single vector with a fixed segment
//! layout.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, EntityChunk};
use crate::embeddings::{
    cosine_similarity, mean_vectors, span_embedding, vicinity_embeddings, EmbeddingTable,
};
use crate::error::{Error, Result};
use crate::syntax::{dependency_path, syntactic_distance, SentenceTrees};

/// Upper bound on the normalized distance component, so a cross-sentence
/// sentinel cannot dominate the input scale.
pub const DISTANCE_CLAMP: f64 = 100.0;

pub const DEFAULT_VICINITY_WINDOW: usize = 50;
pub const DEFAULT_MAX_PATH_LEN: usize = 5;
pub const DEFAULT_DISTANCE_NORM: f64 = 10.0;

/// How the per-entity vicinity block is encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VicinityMode {
    /// All `2 * window` token vectors concatenated.
    Flatten,
    /// One mean vector per side (left, right).
    Mean,
}

impl std::str::FromStr for VicinityMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flatten" => Ok(VicinityMode::Flatten),
            "mean" => Ok(VicinityMode::Mean),
            other => Err(Error::invalid(format!(
                "unknown vicinity mode {other:?} (expected \"flatten\" or \"mean\")"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub embed_dim: usize,
    /// Context tokens taken per side of each entity.
    pub vicinity_window: usize,
    /// Interior dependency-path tokens encoded (zero-padded when shorter).
    pub max_path_len: usize,
    pub vicinity_mode: VicinityMode,
    /// Divisor applied to the raw syntactic distance.
    pub distance_norm: f64,
}

impl FeatureConfig {
    pub fn new(embed_dim: usize) -> Self {
        FeatureConfig {
            embed_dim,
            vicinity_window: DEFAULT_VICINITY_WINDOW,
            max_path_len: DEFAULT_MAX_PATH_LEN,
            vicinity_mode: VicinityMode::Flatten,
            distance_norm: DEFAULT_DISTANCE_NORM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 {
            return Err(Error::invalid("embed_dim must be positive"));
        }
        if self.max_path_len == 0 {
            return Err(Error::invalid("max_path_len must be positive"));
        }
        if !(self.distance_norm > 0.0) {
            return Err(Error::invalid("distance_norm must be positive"));
        }
        Ok(())
    }

    fn vicinity_block_len(&self) -> usize {
        match self.vicinity_mode {
            VicinityMode::Flatten => 2 * self.vicinity_window * self.embed_dim,
            VicinityMode::Mean => 2 * self.embed_dim,
        }
    }
}

/// One named slice of the feature vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Total feature vector length for a config.
pub fn feature_length(config: &FeatureConfig) -> usize {
    2 + config.max_path_len * config.embed_dim
        + 2 * config.embed_dim
        + 2 * config.vicinity_block_len()
}

/// The deterministic segment layout for a config. Segment order is frozen;
/// it is stored inside model files so serialized models stay layout-stable.
pub fn describe_layout(config: &FeatureConfig) -> Vec<Segment> {
    let mut segments = Vec::with_capacity(7);
    let mut offset = 0usize;
    let mut push = |name: &str, len: usize, segments: &mut Vec<Segment>| {
        segments.push(Segment {
            name: name.to_string(),
            offset,
            len,
        });
        offset += len;
    };
    push("similarity", 1, &mut segments);
    push("distance", 1, &mut segments);
    push("dep_path", config.max_path_len * config.embed_dim, &mut segments);
    push("span1", config.embed_dim, &mut segments);
    push("span2", config.embed_dim, &mut segments);
    push("vicinity1", config.vicinity_block_len(), &mut segments);
    push("vicinity2", config.vicinity_block_len(), &mut segments);
    segments
}

/// The stacked numeric representation of one candidate pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Slice out a named segment using the layout of `config`.
    pub fn segment(&self, config: &FeatureConfig, name: &str) -> Option<&[f64]> {
        describe_layout(config)
            .iter()
            .find(|s| s.name == name)
            .map(|s| &self.0[s.offset..s.offset + s.len])
    }
}

/// Per-token embedding vectors for one document, computed once and shared by
/// every pair of that document.
#[derive(Debug, Clone)]
pub struct DocEmbeddings {
    vectors: Vec<Vec<f64>>,
    dim: usize,
}

impl DocEmbeddings {
    pub fn build(table: &EmbeddingTable, doc: &Document) -> Self {
        DocEmbeddings {
            vectors: doc
                .tokens
                .iter()
                .map(|t| table.lookup(&t.text).to_vec())
                .collect(),
            dim: table.dim(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn token(&self, index: usize) -> &[f64] {
        &self.vectors[index]
    }

    fn span_mean(&self, range: Range<usize>) -> Vec<f64> {
        mean_vectors(range.map(|i| self.token(i)), self.dim)
    }
}

/// Assemble the feature vector for a chunk pair, reusing per-document token
/// embeddings.
pub fn build_features(
    entity1: &EntityChunk,
    entity2: &EntityChunk,
    doc: &Document,
    trees: &SentenceTrees,
    emb: &DocEmbeddings,
    config: &FeatureConfig,
) -> Result<FeatureVector> {
    config.validate()?;
    if emb.dim() != config.embed_dim {
        return Err(Error::DimMismatch(format!(
            "embedding table dim {} does not match feature config embed_dim {}",
            emb.dim(),
            config.embed_dim
        )));
    }
    let dim = config.embed_dim;
    let mut values = Vec::with_capacity(feature_length(config));

    let span1 = emb.span_mean(entity1.token_range.clone());
    let span2 = emb.span_mean(entity2.token_range.clone());

    values.push(cosine_similarity(&span1, &span2)?);

    let distance = syntactic_distance(trees, entity1, entity2)?;
    values.push((distance as f64 / config.distance_norm).min(DISTANCE_CLAMP));

    // Embeddings of up to max_path_len interior tokens on the head-to-head
    // dependency path; zero elsewhere (shorter paths, cross-sentence pairs).
    let path_len = config.max_path_len * dim;
    if entity1.sentence_index != entity2.sentence_index {
        values.extend(std::iter::repeat(0.0).take(path_len));
    } else {
        let tree = trees.tree(entity1.sentence_index);
        let h1 = trees.chunk_head(entity1)?;
        let h2 = trees.chunk_head(entity2)?;
        let path = dependency_path(tree, h1, h2)?;
        let sentence_start = doc.sentence_token_start(entity1.sentence_index);
        let mut written = 0usize;
        for &local in path.interior().iter().take(config.max_path_len) {
            values.extend_from_slice(emb.token(sentence_start + local));
            written += dim;
        }
        values.extend(std::iter::repeat(0.0).take(path_len - written));
    }

    values.extend_from_slice(&span1);
    values.extend_from_slice(&span2);

    push_vicinity(&mut values, entity1, emb, config);
    push_vicinity(&mut values, entity2, emb, config);

    debug_assert_eq!(values.len(), feature_length(config));
    Ok(FeatureVector(values))
}

fn push_vicinity(
    values: &mut Vec<f64>,
    chunk: &EntityChunk,
    emb: &DocEmbeddings,
    config: &FeatureConfig,
) {
    let window = config.vicinity_window;
    let dim = config.embed_dim;
    let start = chunk.token_range.start;
    let end = chunk.token_range.end;
    let token_count = emb.vectors.len();

    match config.vicinity_mode {
        VicinityMode::Flatten => {
            for offset in (1..=window).rev() {
                if start >= offset {
                    values.extend_from_slice(emb.token(start - offset));
                } else {
                    values.extend(std::iter::repeat(0.0).take(dim));
                }
            }
            for offset in 0..window {
                let idx = end + offset;
                if idx < token_count {
                    values.extend_from_slice(emb.token(idx));
                } else {
                    values.extend(std::iter::repeat(0.0).take(dim));
                }
            }
        }
        VicinityMode::Mean => {
            // Means over the full window, counting boundary padding as zeros;
            // a window of 0 yields zero vectors.
            let mut left = vec![0.0; dim];
            let mut right = vec![0.0; dim];
            for offset in 1..=window {
                if start >= offset {
                    for (a, x) in left.iter_mut().zip(emb.token(start - offset)) {
                        *a += x;
                    }
                }
                let idx = end + offset - 1;
                if idx < token_count {
                    for (a, x) in right.iter_mut().zip(emb.token(idx)) {
                        *a += x;
                    }
                }
            }
            if window > 0 {
                for a in left.iter_mut().chain(right.iter_mut()) {
                    *a /= window as f64;
                }
            }
            values.extend_from_slice(&left);
            values.extend_from_slice(&right);
        }
    }
}

/// Naive variant that looks tokens up in the table on every use instead of
/// reusing per-document vectors. Exists so the cached path can be checked
/// against it; results must be identical.
pub fn build_features_uncached(
    entity1: &EntityChunk,
    entity2: &EntityChunk,
    doc: &Document,
    trees: &SentenceTrees,
    table: &EmbeddingTable,
    config: &FeatureConfig,
) -> Result<FeatureVector> {
    config.validate()?;
    if table.dim() != config.embed_dim {
        return Err(Error::DimMismatch(format!(
            "embedding table dim {} does not match feature config embed_dim {}",
            table.dim(),
            config.embed_dim
        )));
    }
    let dim = config.embed_dim;
    let mut values = Vec::with_capacity(feature_length(config));

    let span1 = span_embedding(table, doc, entity1);
    let span2 = span_embedding(table, doc, entity2);
    values.push(cosine_similarity(&span1, &span2)?);

    let distance = syntactic_distance(trees, entity1, entity2)?;
    values.push((distance as f64 / config.distance_norm).min(DISTANCE_CLAMP));

    let path_len = config.max_path_len * dim;
    if entity1.sentence_index != entity2.sentence_index {
        values.extend(std::iter::repeat(0.0).take(path_len));
    } else {
        let tree = trees.tree(entity1.sentence_index);
        let h1 = trees.chunk_head(entity1)?;
        let h2 = trees.chunk_head(entity2)?;
        let path = dependency_path(tree, h1, h2)?;
        let sentence_start = doc.sentence_token_start(entity1.sentence_index);
        let mut written = 0usize;
        for &local in path.interior().iter().take(config.max_path_len) {
            values.extend_from_slice(table.lookup(&doc.tokens[sentence_start + local].text));
            written += dim;
        }
        values.extend(std::iter::repeat(0.0).take(path_len - written));
    }

    values.extend_from_slice(&span1);
    values.extend_from_slice(&span2);

    for chunk in [entity1, entity2] {
        match config.vicinity_mode {
            VicinityMode::Flatten => {
                for v in vicinity_embeddings(table, doc, chunk, config.vicinity_window) {
                    values.extend_from_slice(&v);
                }
            }
            VicinityMode::Mean => {
                let vecs = vicinity_embeddings(table, doc, chunk, config.vicinity_window);
                let w = config.vicinity_window;
                let left = mean_window(&vecs[..w], dim, w);
                let right = mean_window(&vecs[w..], dim, w);
                values.extend_from_slice(&left);
                values.extend_from_slice(&right);
            }
        }
    }

    debug_assert_eq!(values.len(), feature_length(config));
    Ok(FeatureVector(values))
}

fn mean_window(vectors: &[Vec<f64>], dim: usize, window: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    for v in vectors {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    if window > 0 {
        for a in &mut acc {
            *a /= window as f64;
        }
    }
    acc
}
