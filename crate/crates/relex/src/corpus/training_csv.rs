//! Training CSV reader/writer.
//!
//! Each row is one training example: a context sentence, two entity spans
//! given as character offsets into that sentence (begin inclusive, end
//! exclusive), and a relation label. The fixed 11-column header is
//! `doc_id,sentence,e1_begin,e1_end,e1_type,chunk1,e2_begin,e2_end,e2_type,chunk2,label`.

use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};

use super::slice_chars;

pub const TRAINING_CSV_HEADER: [&str; 11] = [
    "doc_id", "sentence", "e1_begin", "e1_end", "e1_type", "chunk1", "e2_begin", "e2_end",
    "e2_type", "chunk2", "label",
];

/// One labeled entity pair in its context sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationExample {
    pub doc_id: String,
    pub sentence: String,
    pub e1_begin: usize,
    pub e1_end: usize,
    pub e1_type: String,
    pub chunk1: String,
    pub e2_begin: usize,
    pub e2_end: usize,
    pub e2_type: String,
    pub chunk2: String,
    pub label: String,
}

impl RelationExample {
    /// Validate that both offset pairs select exactly the stated chunk texts.
    pub fn check_offsets(&self, row: usize) -> Result<()> {
        check_span(&self.sentence, self.e1_begin, self.e1_end, &self.chunk1, row)?;
        check_span(&self.sentence, self.e2_begin, self.e2_end, &self.chunk2, row)?;
        Ok(())
    }
}

fn check_span(sentence: &str, begin: usize, end: usize, chunk: &str, row: usize) -> Result<()> {
    let len = sentence.chars().count();
    if begin >= end || end > len {
        return Err(Error::CsvRow {
            row,
            msg: format!("offsets {begin}..{end} out of range for sentence of length {len}"),
        });
    }
    let found = slice_chars(sentence, begin, end);
    if found != chunk {
        return Err(Error::ChunkTextMismatch {
            row,
            expected: chunk.to_string(),
            found,
        });
    }
    Ok(())
}

fn parse_offset(field: &str, name: &str, row: usize) -> Result<usize> {
    field.trim().parse().map_err(|_| Error::CsvRow {
        row,
        msg: format!("non-integer {name} {field:?}"),
    })
}

pub fn read_training_csv(path: impl AsRef<Path>) -> Result<Vec<RelationExample>> {
    let file = File::open(path.as_ref())?;
    read_training_records(file)
}

fn read_training_records(reader: impl std::io::Read) -> Result<Vec<RelationExample>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    {
        let headers = rdr.headers()?;
        let got: Vec<&str> = headers.iter().collect();
        if got != TRAINING_CSV_HEADER {
            return Err(Error::invalid(format!(
                "unexpected CSV header {got:?}, expected {TRAINING_CSV_HEADER:?}"
            )));
        }
    }
    let mut examples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1; // 1-based data rows
        let record = record?;
        if record.len() != TRAINING_CSV_HEADER.len() {
            return Err(Error::CsvRow {
                row,
                msg: format!("expected {} fields, found {}", TRAINING_CSV_HEADER.len(), record.len()),
            });
        }
        let example = RelationExample {
            doc_id: record[0].to_string(),
            sentence: record[1].to_string(),
            e1_begin: parse_offset(&record[2], "e1_begin", row)?,
            e1_end: parse_offset(&record[3], "e1_end", row)?,
            e1_type: record[4].to_string(),
            chunk1: record[5].to_string(),
            e2_begin: parse_offset(&record[6], "e2_begin", row)?,
            e2_end: parse_offset(&record[7], "e2_end", row)?,
            e2_type: record[8].to_string(),
            chunk2: record[9].to_string(),
            label: record[10].to_string(),
        };
        example.check_offsets(row)?;
        examples.push(example);
    }
    Ok(examples)
}

pub fn write_training_csv(path: impl AsRef<Path>, examples: &[RelationExample]) -> Result<()> {
    let file = File::create(path.as_ref())?;
    write_training_records(file, examples)
}

fn write_training_records(writer: impl std::io::Write, examples: &[RelationExample]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(TRAINING_CSV_HEADER)?;
    for e in examples {
        wtr.write_record([
            e.doc_id.as_str(),
            e.sentence.as_str(),
            &e.e1_begin.to_string(),
            &e.e1_end.to_string(),
            e.e1_type.as_str(),
            e.chunk1.as_str(),
            &e.e2_begin.to_string(),
            &e.e2_end.to_string(),
            e.e2_type.as_str(),
            e.chunk2.as_str(),
            e.label.as_str(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
