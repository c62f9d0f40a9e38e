//! Reader for CoNLL-style NER files.
//!
//! Format, one token per line, whitespace-separated columns:
//!
//! ```text
//! <token> <bio-tag> [<ignored>] [<head>]
//! ```
//!
//! A blank line ends a sentence, a line whose first column is `-DOCSTART-`
//! ends a document. The optional 4th column is a dependency head: token
//! numbering is 1-based within the sentence and `0` marks the root. Document
//! text is reconstructed by joining tokens with single spaces.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::syntax::DependencyTree;

use super::bio::{chunks_from_bio, BioTag};
use super::{Document, Sentence, Token};

struct RawToken {
    text: String,
    tag: BioTag,
    head: Option<usize>, // as written in the file: 0 = root
    line: usize,
}

pub fn read_conll(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let content = fs::read_to_string(path)?;
    parse_conll(&content, &path.display().to_string())
}

/// Parse CoNLL content; `source` is used in error messages.
pub fn parse_conll(content: &str, source: &str) -> Result<Vec<Document>> {
    let mut docs: Vec<Document> = Vec::new();
    let mut sentences: Vec<Vec<RawToken>> = Vec::new();
    let mut current: Vec<RawToken> = Vec::new();

    let mut finish_sentence = |sentences: &mut Vec<Vec<RawToken>>, current: &mut Vec<RawToken>| {
        if !current.is_empty() {
            sentences.push(std::mem::take(current));
        }
    };

    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            finish_sentence(&mut sentences, &mut current);
            continue;
        }
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        if cols[0] == "-DOCSTART-" {
            finish_sentence(&mut sentences, &mut current);
            if !sentences.is_empty() {
                docs.push(build_document(docs.len(), std::mem::take(&mut sentences), source)?);
            }
            continue;
        }
        if cols.len() < 2 {
            return Err(Error::parse(source, line_no, "missing tag column"));
        }
        let tag = BioTag::parse(cols[1])
            .map_err(|e| Error::parse(source, line_no, e.to_string()))?;
        let head = if cols.len() >= 4 {
            let h: usize = cols[3].parse().map_err(|_| {
                Error::parse(source, line_no, format!("invalid head index {:?}", cols[3]))
            })?;
            Some(h)
        } else {
            None
        };
        current.push(RawToken {
            text: cols[0].to_string(),
            tag,
            head,
            line: line_no,
        });
    }
    finish_sentence(&mut sentences, &mut current);
    if !sentences.is_empty() {
        docs.push(build_document(docs.len(), std::mem::take(&mut sentences), source)?);
    }
    Ok(docs)
}

fn build_document(doc_number: usize, raw: Vec<Vec<RawToken>>, source: &str) -> Result<Document> {
    let mut tokens: Vec<Token> = Vec::new();
    let mut sentences: Vec<Sentence> = Vec::new();
    let mut tags: Vec<BioTag> = Vec::new();
    let mut trees: Vec<Option<DependencyTree>> = Vec::new();
    let mut char_pos = 0usize;

    for (sent_idx, sent) in raw.iter().enumerate() {
        let start = tokens.len();
        for t in sent {
            let len = t.text.chars().count();
            let doc_index = tokens.len();
            tokens.push(Token {
                text: t.text.clone(),
                doc_index,
                sentence_index: sent_idx,
                char_begin: char_pos,
                char_end: char_pos + len,
            });
            tags.push(t.tag.clone());
            char_pos += len + 1; // single-space join
        }
        sentences.push(Sentence {
            index: sent_idx,
            token_range: start..tokens.len(),
        });
        trees.push(sentence_tree(sent, source)?);
    }

    let text = tokens
        .iter()
        .map(|t| t.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    let chunks = chunks_from_bio(&tokens, &tags)?;

    Ok(Document {
        id: format!("doc{doc_number}"),
        text,
        tokens,
        sentences,
        chunks,
        trees,
    })
}

fn sentence_tree(sent: &[RawToken], source: &str) -> Result<Option<DependencyTree>> {
    let with_heads = sent.iter().filter(|t| t.head.is_some()).count();
    if with_heads == 0 {
        return Ok(None);
    }
    if with_heads != sent.len() {
        let missing = sent.iter().find(|t| t.head.is_none()).expect("mixed heads");
        return Err(Error::parse(
            source,
            missing.line,
            "head column present for some tokens of the sentence but missing here",
        ));
    }
    let mut heads = Vec::with_capacity(sent.len());
    for t in sent {
        let h = t.head.expect("checked above");
        if h == 0 {
            heads.push(None);
        } else if h <= sent.len() {
            heads.push(Some(h - 1));
        } else {
            return Err(Error::parse(
                source,
                t.line,
                format!("head index {h} exceeds sentence length {}", sent.len()),
            ));
        }
    }
    let tree = DependencyTree::new(heads, None)
        .map_err(|e| Error::parse(source, sent[0].line, e.to_string()))?;
    Ok(Some(tree))
}
