//! Line-delimited JSON record files: pairs, corpora and revision dumps.
//!
//! One object per line, UTF-8. Blank lines are skipped and CRLF endings
//! are accepted. Fields this crate does not know are carried through a
//! read-then-write unchanged.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::RevisionMeta;
use crate::analysis::GroupedDocument;
use crate::error::{Error, Result};
use crate::train::RevisionPair;

/// A document to score, with optional grouping and time metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub doc_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_label: Option<String>,
    /// ISO-8601, kept verbatim.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_r: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl CorpusRecord {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            text: text.into(),
            group_id: None,
            source_id: None,
            source_label: None,
            timestamp: None,
            quality_score: None,
            c_r: None,
            k: None,
            extra: Default::default(),
        }
    }

    pub fn parsed_timestamp(&self) -> Result<Option<DateTime<Utc>>> {
        self.timestamp
            .as_deref()
            .map(|t| parse_timestamp(t).map_err(|reason| Error::InvalidConfig(format!("{}: {reason}", self.doc_id))))
            .transpose()
    }

    /// View as a grouped document. Without a group the document forms its
    /// own group; without a source it is attributed to "unknown".
    pub fn to_grouped(&self) -> Result<GroupedDocument> {
        Ok(GroupedDocument {
            doc_id: self.doc_id.clone(),
            group_id: self.group_id.clone().unwrap_or_else(|| self.doc_id.clone()),
            source_id: self.source_id.clone().unwrap_or_else(|| "unknown".into()),
            source_label: self.source_label.clone(),
            text: self.text.clone(),
            timestamp: self.parsed_timestamp()?,
        })
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.doc_id.is_empty() {
            return Err("doc_id is empty".into());
        }
        if let Some(t) = &self.timestamp {
            parse_timestamp(t)?;
        }
        if let (Some(c), Some(k)) = (self.c_r, self.k) {
            if k == 0 || c > 2 * k {
                return Err(format!("c_r = {c} is not within [0, 2k] for k = {k}"));
            }
        }
        Ok(())
    }
}

/// RFC 3339 timestamps, or a bare date, or a naive date-time taken as UTC.
pub(crate) fn parse_timestamp(s: &str) -> std::result::Result<DateTime<Utc>, String> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    if let Ok(t) = chrono::NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S") {
        return Ok(t.and_utc());
    }
    if let Ok(d) = chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight").and_utc());
    }
    Err(format!("unparseable timestamp {s:?}"))
}

/// Reads one record per line, applying `validate` to each.
pub fn read_jsonl<T, R, V>(reader: R, validate: V) -> Result<Vec<T>>
where
    T: DeserializeOwned,
    R: BufRead,
    V: Fn(&T) -> std::result::Result<(), String>,
{
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(format!("<line {line_no}>"), e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| Error::MalformedRecord {
            line_no,
            line: excerpt(line),
            reason,
        };
        let record: T = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        validate(&record).map_err(malformed)?;
        out.push(record);
    }
    Ok(out)
}

fn excerpt(line: &str) -> String {
    const MAX: usize = 160;
    match line.char_indices().nth(MAX) {
        Some((cut, _)) => format!("{}…", &line[..cut]),
        None => line.to_string(),
    }
}

/// Streaming writer of newline-terminated JSON records.
pub struct JsonlWriter<W: Write> {
    out: W,
}

impl<W: Write> JsonlWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn write_jsonl<T: Serialize, W: Write>(records: &[T], out: W) -> std::io::Result<()> {
    let mut w = JsonlWriter::new(out);
    for r in records {
        w.write(r)?;
    }
    w.finish().map(drop)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn save<T: Serialize>(records: &[T], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_jsonl(records, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn read_pairs_from<R: BufRead>(reader: R) -> Result<Vec<RevisionPair>> {
    read_jsonl(reader, RevisionPair::validate)
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<RevisionPair>> {
    read_pairs_from(open(path.as_ref())?)
}

pub fn write_pairs(pairs: &[RevisionPair], path: impl AsRef<Path>) -> Result<()> {
    save(pairs, path.as_ref())
}

pub fn read_corpus_from<R: BufRead>(reader: R) -> Result<Vec<CorpusRecord>> {
    read_jsonl(reader, CorpusRecord::validate)
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusRecord>> {
    read_corpus_from(open(path.as_ref())?)
}

pub fn write_corpus(docs: &[CorpusRecord], path: impl AsRef<Path>) -> Result<()> {
    save(docs, path.as_ref())
}

pub fn read_revisions_from<R: BufRead>(reader: R) -> Result<Vec<RevisionMeta>> {
    read_jsonl(reader, |r: &RevisionMeta| {
        if r.article_id.is_empty() {
            Err("article_id is empty".into())
        } else {
            Ok(())
        }
    })
}

pub fn read_revisions(path: impl AsRef<Path>) -> Result<Vec<RevisionMeta>> {
    read_revisions_from(open(path.as_ref())?)
}

pub fn write_revisions(revisions: &[RevisionMeta], path: impl AsRef<Path>) -> Result<()> {
    save(revisions, path.as_ref())
}
