//! Document data model: tokens, sentences, entity chunks, and the readers
//! that produce them (CoNLL files, training CSVs).
//!
//! All character offsets count Unicode scalar values, not bytes, so they line
//! up with the character-based spans used in training CSVs.

pub mod bio;
pub mod conll;
pub mod training_csv;

use std::ops::Range;

use crate::error::{Error, Result};
use crate::syntax::DependencyTree;

pub use bio::{chunks_from_bio, tags_from_chunks, BioTag};
pub use conll::read_conll;
pub use training_csv::{read_training_csv, write_training_csv, RelationExample};

/// A single token with character offsets into the document text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    /// Index into the document token list.
    pub doc_index: usize,
    pub sentence_index: usize,
    pub char_begin: usize,
    /// Exclusive end offset; always greater than `char_begin`.
    pub char_end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub index: usize,
    /// Half-open range into the document token list.
    pub token_range: Range<usize>,
}

/// A typed entity span covering a contiguous token range within one sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityChunk {
    pub entity_type: String,
    /// Half-open range into the document token list.
    pub token_range: Range<usize>,
    /// Space-joined text of the covered tokens.
    pub text: String,
    pub sentence_index: usize,
}

/// The unit of pipeline processing: tokenized text with sentences, entity
/// chunks, and (optionally) one dependency tree per sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub sentences: Vec<Sentence>,
    pub chunks: Vec<EntityChunk>,
    /// Per-sentence dependency trees. Empty, or one entry per sentence where
    /// `None` means "no parse supplied" (a chain fallback is used downstream).
    pub trees: Vec<Option<DependencyTree>>,
}

/// Characters that always form their own single-character token.
pub const PUNCTUATION: &[char] = &['.', ',', ';', ':', '!', '?', '(', ')', '[', ']'];

fn push_token(tokens: &mut Vec<Token>, chars: &[char], begin: usize, end: usize, sentence: usize) {
    let doc_index = tokens.len();
    tokens.push(Token {
        text: chars[begin..end].iter().collect(),
        doc_index,
        sentence_index: sentence,
        char_begin: begin,
        char_end: end,
    });
}

/// Whitespace tokenization with punctuation split off as single-character
/// tokens. Sentences end after `.` `!` `?` followed by whitespace.
pub fn tokenize(text: &str) -> (Vec<Token>, Vec<Sentence>) {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens: Vec<Token> = Vec::new();
    let mut sentences: Vec<Sentence> = Vec::new();
    let mut sentence_start = 0usize; // token index opening the current sentence
    let mut word_begin: Option<usize> = None;

    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            if let Some(begin) = word_begin.take() {
                push_token(&mut tokens, &chars, begin, i, sentences.len());
            }
        } else if PUNCTUATION.contains(&c) {
            if let Some(begin) = word_begin.take() {
                push_token(&mut tokens, &chars, begin, i, sentences.len());
            }
            push_token(&mut tokens, &chars, i, i + 1, sentences.len());
            let ends_sentence = matches!(c, '.' | '!' | '?')
                && chars.get(i + 1).is_some_and(|n| n.is_whitespace());
            if ends_sentence && tokens.len() > sentence_start {
                sentences.push(Sentence {
                    index: sentences.len(),
                    token_range: sentence_start..tokens.len(),
                });
                sentence_start = tokens.len();
            }
        } else {
            if word_begin.is_none() {
                word_begin = Some(i);
            }
        }
        i += 1;
    }
    if let Some(begin) = word_begin.take() {
        push_token(&mut tokens, &chars, begin, chars.len(), sentences.len());
    }
    if tokens.len() > sentence_start {
        sentences.push(Sentence {
            index: sentences.len(),
            token_range: sentence_start..tokens.len(),
        });
    }
    (tokens, sentences)
}

/// Slice `text` by character (not byte) offsets.
pub fn slice_chars(text: &str, begin: usize, end: usize) -> String {
    text.chars().skip(begin).take(end.saturating_sub(begin)).collect()
}

impl Document {
    /// Build a document from raw text plus typed chunks given as
    /// (entity_type, token_range) pairs over the tokenization of `text`.
    pub fn from_text(id: impl Into<String>, text: impl Into<String>) -> Document {
        let text = text.into();
        let (tokens, sentences) = tokenize(&text);
        Document {
            id: id.into(),
            text,
            tokens,
            sentences,
            chunks: Vec::new(),
            trees: Vec::new(),
        }
    }

    /// Append a chunk over `token_range`; text and sentence index are derived
    /// from the tokens.
    pub fn add_chunk(&mut self, entity_type: impl Into<String>, token_range: Range<usize>) -> Result<()> {
        if token_range.is_empty() || token_range.end > self.tokens.len() {
            return Err(Error::invalid(format!(
                "chunk token range {token_range:?} out of bounds for {} tokens",
                self.tokens.len()
            )));
        }
        let sentence_index = self.tokens[token_range.start].sentence_index;
        if self.tokens[token_range.clone()]
            .iter()
            .any(|t| t.sentence_index != sentence_index)
        {
            return Err(Error::invalid(format!(
                "chunk token range {token_range:?} crosses a sentence boundary"
            )));
        }
        let text = join_token_texts(&self.tokens[token_range.clone()]);
        self.chunks.push(EntityChunk {
            entity_type: entity_type.into(),
            token_range,
            text,
            sentence_index,
        });
        Ok(())
    }

    pub fn sentence_token_start(&self, sentence_index: usize) -> usize {
        self.sentences[sentence_index].token_range.start
    }

    /// Check every structural invariant; returns the first violation found.
    pub fn validate(&self) -> Result<()> {
        let mut prev_end = 0usize;
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.doc_index != i {
                return Err(Error::invalid(format!("token {i} has doc_index {}", tok.doc_index)));
            }
            if tok.char_end <= tok.char_begin {
                return Err(Error::invalid(format!("token {i} has empty char span")));
            }
            if i > 0 && tok.char_begin < prev_end {
                return Err(Error::invalid(format!("token {i} overlaps its predecessor")));
            }
            prev_end = tok.char_end;
            let sliced = slice_chars(&self.text, tok.char_begin, tok.char_end);
            if sliced != tok.text {
                return Err(Error::invalid(format!(
                    "token {i} text {:?} does not match document slice {:?}",
                    tok.text, sliced
                )));
            }
        }
        let mut next_start = 0usize;
        for (i, s) in self.sentences.iter().enumerate() {
            if s.index != i || s.token_range.start != next_start || s.token_range.is_empty() {
                return Err(Error::invalid(format!("sentence {i} ranges are not contiguous")));
            }
            next_start = s.token_range.end;
        }
        if next_start != self.tokens.len() {
            return Err(Error::invalid("sentences do not cover all tokens".to_string()));
        }
        for (i, c) in self.chunks.iter().enumerate() {
            if c.token_range.is_empty() || c.token_range.end > self.tokens.len() {
                return Err(Error::invalid(format!("chunk {i} range out of bounds")));
            }
            if self.tokens[c.token_range.clone()]
                .iter()
                .any(|t| t.sentence_index != c.sentence_index)
            {
                return Err(Error::invalid(format!("chunk {i} crosses sentences")));
            }
            let joined = join_token_texts(&self.tokens[c.token_range.clone()]);
            if joined != c.text {
                return Err(Error::invalid(format!(
                    "chunk {i} text {:?} does not match tokens {:?}",
                    c.text, joined
                )));
            }
        }
        if !self.trees.is_empty() {
            if self.trees.len() != self.sentences.len() {
                return Err(Error::invalid("tree list length differs from sentence count".to_string()));
            }
            for (i, t) in self.trees.iter().enumerate() {
                if let Some(tree) = t {
                    let want = self.sentences[i].token_range.len();
                    if tree.len() != want {
                        return Err(Error::invalid(format!(
                            "tree for sentence {i} has {} nodes, sentence has {want} tokens",
                            tree.len()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn join_token_texts(tokens: &[Token]) -> String {
    tokens
        .iter()
        .map(|t| t.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_splits_punctuation_and_sentences() {
        let (tokens, sentences) = tokenize("CT scan of chest.");
        let texts: Vec<&str> = tokens.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, ["CT", "scan", "of", "chest", "."]);
        assert_eq!(sentences.len(), 1);
        assert_eq!(sentences[0].token_range, 0..5);
    }

    #[test]
    fn tokenize_empty_text() {
        let (tokens, sentences) = tokenize("");
        assert!(tokens.is_empty());
        assert!(sentences.is_empty());
    }

    #[test]
    fn tokenize_sentence_break_requires_following_whitespace() {
        let (tokens, sentences) = tokenize("A. B");
        let texts: Vec<&str> = tokens.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, ["A", ".", "B"]);
        assert_eq!(sentences.len(), 2);
        assert_eq!(sentences[0].token_range, 0..2);
        assert_eq!(sentences[1].token_range, 2..3);

        // No whitespace after the period: still one sentence.
        let (_, sentences) = tokenize("A.B");
        assert_eq!(sentences.len(), 1);
    }

    #[test]
    fn tokenize_offsets_are_exact() {
        let text = "pain, (severe) in chest.";
        let (tokens, _) = tokenize(text);
        for t in &tokens {
            assert_eq!(slice_chars(text, t.char_begin, t.char_end), t.text);
        }
    }

    #[test]
    fn document_from_text_validates() {
        let mut doc = Document::from_text("d0", "pain in chest. CT scan done.");
        doc.add_chunk("Symptom", 0..1).unwrap();
        doc.add_chunk("Test", 4..6).unwrap();
        doc.validate().unwrap();
        assert_eq!(doc.chunks[1].text, "CT scan");
        assert_eq!(doc.chunks[1].sentence_index, 1);
    }

    #[test]
    fn add_chunk_rejects_cross_sentence_ranges() {
        let mut doc = Document::from_text("d0", "A. B");
        assert!(doc.add_chunk("X", 1..3).is_err());
        assert!(doc.add_chunk("X", 0..0).is_err());
    }
}
