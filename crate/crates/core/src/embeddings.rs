//! Static word-embedding tables.
//!
//! Tables are read from the common whitespace-separated text format: an
//! optional `count dim` header followed by one `word v1 v2 ... vd` line per
//! word. Words are folded to lowercase on load and on lookup, and the first
//! occurrence of a repeated word wins.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::textproc::DocumentFeatures;

/// Immutable word → vector store. Vectors are kept as `f32`, which is the
/// precision published vectors ship with; all downstream arithmetic is `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

impl EmbeddingTable {
    /// An empty table of the given dimension. Use [`EmbeddingTable::insert`]
    /// to populate it.
    pub fn with_dimension(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be >= 1".into()));
        }
        Ok(Self {
            dimension,
            words: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        })
    }

    /// Builds a table from `(word, vector)` entries.
    pub fn from_entries<I, S, V>(dimension: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, V)>,
        S: AsRef<str>,
        V: AsRef<[f32]>,
    {
        let mut table = Self::with_dimension(dimension)?;
        for (word, vector) in entries {
            table.insert(word.as_ref(), vector.as_ref())?;
        }
        if table.is_empty() {
            return Err(Error::EmptyTable);
        }
        Ok(table)
    }

    /// Inserts a word unless it (after lowercasing) is already present.
    /// Returns whether the entry was added.
    pub fn insert(&mut self, word: &str, vector: &[f32]) -> Result<bool> {
        if vector.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: vector.len(),
            });
        }
        let key = word.to_lowercase();
        if key.is_empty() {
            return Err(Error::InvalidConfig("embedding words must be nonempty".into()));
        }
        if self.index.contains_key(&key) {
            return Ok(false);
        }
        self.index.insert(key.clone(), self.words.len());
        self.words.push(key);
        self.data.extend_from_slice(vector);
        Ok(true)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn vocabulary_size(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Vector for `word`, case-folded. `None` when out of vocabulary.
    pub fn lookup(&self, word: &str) -> Option<&[f32]> {
        match self.index.get(word) {
            Some(&i) => Some(self.row(i)),
            None => {
                let folded = word.to_lowercase();
                self.index.get(&folded).map(|&i| self.row(i))
            }
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.lookup(word).is_some()
    }

    /// Words in load order.
    pub fn words(&self) -> impl ExactSizeIterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    /// `(word, vector)` pairs in load order.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&str, &[f32])> {
        self.words
            .iter()
            .zip(self.data.chunks_exact(self.dimension))
            .map(|(w, v)| (w.as_str(), v))
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dimension..(i + 1) * self.dimension]
    }

    /// Writes the table in the text format, with a `count dim` header.
    /// Values are written in the shortest form that parses back to the same
    /// `f32`, so a reload reproduces the table bit for bit.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.vocabulary_size(), self.dimension)?;
        for (word, vector) in self.iter() {
            out.write_all(word.as_bytes())?;
            for v in vector {
                write!(out, " {v}")?;
            }
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_text(BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}

/// Loads an embedding file from disk.
pub fn load_embeddings(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file), expected_dim).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses the embedding text format from any buffered reader.
pub fn read_embeddings<R: BufRead>(reader: R, expected_dim: Option<usize>) -> Result<EmbeddingTable> {
    if expected_dim == Some(0) {
        return Err(Error::InvalidConfig("expected dimension must be >= 1".into()));
    }
    let mut dimension: Option<usize> = None;
    let mut table: Option<EmbeddingTable> = None;

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<embeddings>", e))?;
        let mut fields = line.split_ascii_whitespace();
        let Some(word) = fields.next() else {
            continue;
        };
        let values: Vec<&str> = fields.collect();

        if line_no == 1 && values.len() == 1 {
            if let (Ok(_count), Ok(dim)) = (word.parse::<usize>(), values[0].parse::<usize>()) {
                if dim == 0 {
                    return Err(Error::MalformedLine {
                        line_no,
                        reason: "header declares dimension 0".into(),
                    });
                }
                dimension = Some(dim);
                continue;
            }
        }

        if values.is_empty() {
            return Err(Error::MalformedLine {
                line_no,
                reason: "no vector components".into(),
            });
        }
        let dim = *dimension.get_or_insert(values.len());
        if values.len() != dim {
            return Err(Error::MalformedLine {
                line_no,
                reason: format!("expected {dim} components, found {}", values.len()),
            });
        }
        let vector = values
            .iter()
            .map(|v| v.parse::<f32>())
            .collect::<std::result::Result<Vec<f32>, _>>()
            .map_err(|e| Error::MalformedLine {
                line_no,
                reason: format!("unparseable component: {e}"),
            })?;
        if let Some(bad) = vector.iter().find(|v| !v.is_finite()) {
            return Err(Error::MalformedLine {
                line_no,
                reason: format!("non-finite component {bad}"),
            });
        }

        let table = match &mut table {
            Some(t) => t,
            None => table.insert(EmbeddingTable::with_dimension(dim)?),
        };
        table.insert(word, &vector)?;
    }

    let table = table.ok_or(Error::EmptyTable)?;
    if let Some(expected) = expected_dim {
        if expected != table.dimension {
            return Err(Error::DimensionMismatch {
                expected,
                found: table.dimension,
            });
        }
    }
    Ok(table)
}

/// Which per-document vector a corpus mean is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanKind {
    /// Mean of unit vectors. This makes the general word score equal the
    /// corpus average of contextual word scores.
    #[default]
    Normalized,
    /// Mean of the unnormalized embedding sums.
    Raw,
}

/// Arithmetic mean of the documents' normalized feature vectors.
pub fn corpus_mean_normalized(table: &EmbeddingTable, docs: &[DocumentFeatures]) -> Result<Vec<f64>> {
    corpus_mean(table, docs, MeanKind::Normalized)
}

pub fn corpus_mean(table: &EmbeddingTable, docs: &[DocumentFeatures], kind: MeanKind) -> Result<Vec<f64>> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let dim = table.dimension();
    let mut mean = vec![0.0; dim];
    for doc in docs {
        let v = match kind {
            MeanKind::Normalized => &doc.unit_vector,
            MeanKind::Raw => &doc.sum_vector,
        };
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    let n = docs.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}
