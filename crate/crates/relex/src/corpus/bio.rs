//! BIO tag sequences and conversion to/from entity chunks.

use std::fmt;

use crate::error::{Error, Result};

use super::{join_token_texts, EntityChunk, Token};

/// One per-token BIO tag: `O`, `B-<type>`, or `I-<type>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BioTag {
    Outside,
    Begin(String),
    Inside(String),
}

impl BioTag {
    pub fn parse(s: &str) -> Result<BioTag> {
        if s == "O" {
            return Ok(BioTag::Outside);
        }
        if let Some(t) = s.strip_prefix("B-") {
            if !t.is_empty() {
                return Ok(BioTag::Begin(t.to_string()));
            }
        }
        if let Some(t) = s.strip_prefix("I-") {
            if !t.is_empty() {
                return Ok(BioTag::Inside(t.to_string()));
            }
        }
        Err(Error::invalid(format!("invalid BIO tag {s:?}")))
    }

    pub fn entity_type(&self) -> Option<&str> {
        match self {
            BioTag::Outside => None,
            BioTag::Begin(t) | BioTag::Inside(t) => Some(t),
        }
    }
}

impl fmt::Display for BioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioTag::Outside => write!(f, "O"),
            BioTag::Begin(t) => write!(f, "B-{t}"),
            BioTag::Inside(t) => write!(f, "I-{t}"),
        }
    }
}

/// Convert a BIO tag sequence to entity chunks.
///
/// Lenient mode: an `I-X` with no preceding `B-X`/`I-X` of the same type is
/// promoted to `B-X` instead of rejected. Chunks never cross sentence
/// boundaries; a run continuing into the next sentence starts a new chunk.
pub fn chunks_from_bio(tokens: &[Token], tags: &[BioTag]) -> Result<Vec<EntityChunk>> {
    if tokens.len() != tags.len() {
        return Err(Error::TagTokenLengthMismatch {
            tokens: tokens.len(),
            tags: tags.len(),
        });
    }
    let mut chunks = Vec::new();
    let mut open: Option<(usize, &str)> = None; // (start index, type)

    let mut close = |open: &mut Option<(usize, &str)>, end: usize, chunks: &mut Vec<EntityChunk>| {
        if let Some((start, entity_type)) = open.take() {
            chunks.push(EntityChunk {
                entity_type: entity_type.to_string(),
                token_range: start..end,
                text: join_token_texts(&tokens[start..end]),
                sentence_index: tokens[start].sentence_index,
            });
        }
    };

    for (i, tag) in tags.iter().enumerate() {
        match tag {
            BioTag::Outside => close(&mut open, i, &mut chunks),
            BioTag::Begin(t) => {
                close(&mut open, i, &mut chunks);
                open = Some((i, t));
            }
            BioTag::Inside(t) => {
                let continues = open.is_some_and(|(start, open_type)| {
                    open_type == t && tokens[start].sentence_index == tokens[i].sentence_index
                });
                if !continues {
                    close(&mut open, i, &mut chunks);
                    open = Some((i, t));
                }
            }
        }
    }
    close(&mut open, tokens.len(), &mut chunks);
    Ok(chunks)
}

/// Regenerate the BIO tags describing `chunks` over `token_count` tokens.
///
/// Fails on out-of-bounds or overlapping chunks.
pub fn tags_from_chunks(token_count: usize, chunks: &[EntityChunk]) -> Result<Vec<BioTag>> {
    let mut tags = vec![BioTag::Outside; token_count];
    for chunk in chunks {
        if chunk.token_range.is_empty() || chunk.token_range.end > token_count {
            return Err(Error::invalid(format!(
                "chunk range {:?} out of bounds for {token_count} tokens",
                chunk.token_range
            )));
        }
        for i in chunk.token_range.clone() {
            if tags[i] != BioTag::Outside {
                return Err(Error::invalid(format!("overlapping chunks at token {i}")));
            }
            tags[i] = if i == chunk.token_range.start {
                BioTag::Begin(chunk.entity_type.clone())
            } else {
                BioTag::Inside(chunk.entity_type.clone())
            };
        }
    }
    Ok(tags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    fn tags(specs: &[&str]) -> Vec<BioTag> {
        specs.iter().map(|s| BioTag::parse(s).unwrap()).collect()
    }

    #[test]
    fn begin_inside_run_becomes_one_chunk() {
        let (tokens, _) = tokenize("aspirin tablets daily");
        let chunks = chunks_from_bio(&tokens, &tags(&["B-Drug", "I-Drug", "O"])).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].entity_type, "Drug");
        assert_eq!(chunks[0].text, "aspirin tablets");
        assert_eq!(chunks[0].token_range, 0..2);
    }

    #[test]
    fn all_outside_yields_no_chunks() {
        let (tokens, _) = tokenize("no entities");
        let chunks = chunks_from_bio(&tokens, &tags(&["O", "O"])).unwrap();
        assert!(chunks.is_empty());
    }

    #[test]
    fn leading_inside_is_promoted() {
        let (tokens, _) = tokenize("ecg normal xray");
        let chunks = chunks_from_bio(&tokens, &tags(&["I-Test", "O", "B-Test"])).unwrap();
        assert_eq!(chunks.len(), 2);
        assert_eq!(chunks[0].token_range, 0..1);
        assert_eq!(chunks[1].token_range, 2..3);
        assert!(chunks.iter().all(|c| c.entity_type == "Test"));
    }

    #[test]
    fn inside_after_different_type_starts_new_chunk() {
        let (tokens, _) = tokenize("a b c");
        let chunks = chunks_from_bio(&tokens, &tags(&["B-X", "I-Y", "I-Y"])).unwrap();
        assert_eq!(chunks.len(), 2);
        assert_eq!(chunks[0].entity_type, "X");
        assert_eq!(chunks[0].token_range, 0..1);
        assert_eq!(chunks[1].entity_type, "Y");
        assert_eq!(chunks[1].token_range, 1..3);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let (tokens, _) = tokenize("a b");
        let err = chunks_from_bio(&tokens, &tags(&["O"])).unwrap_err();
        assert!(err.to_string().contains("tag/token length mismatch"));
    }

    #[test]
    fn chunks_do_not_cross_sentence_boundaries() {
        let (tokens, _) = tokenize("x. y");
        // Continuing I across the sentence break starts a new chunk.
        let chunks = chunks_from_bio(&tokens, &tags(&["B-T", "O", "I-T"])).unwrap();
        assert_eq!(chunks.len(), 2);
        assert_eq!(chunks[1].sentence_index, 1);
    }

    #[test]
    fn roundtrip_from_chunks() {
        let (tokens, _) = tokenize("pain in left chest wall");
        let t = tags(&["B-Symptom", "O", "B-BodyPart", "I-BodyPart", "I-BodyPart"]);
        let chunks = chunks_from_bio(&tokens, &t).unwrap();
        let regenerated = tags_from_chunks(tokens.len(), &chunks).unwrap();
        assert_eq!(regenerated, t);
        let rechunked = chunks_from_bio(&tokens, &regenerated).unwrap();
        assert_eq!(rechunked, chunks);
    }

    #[test]
    fn chunk_lists_are_sorted_and_disjoint() {
        let (tokens, _) = tokenize("a b c d e");
        let chunks =
            chunks_from_bio(&tokens, &tags(&["I-B", "B-A", "I-A", "B-A", "O"])).unwrap();
        for w in chunks.windows(2) {
            assert!(w[0].token_range.end <= w[1].token_range.start);
        }
    }
}
