//! Text preprocessing: tokenization, wikitext stripping, bag-of-words
//! embedding features and edit distance.

mod levenshtein;
mod wikitext;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use levenshtein::{levenshtein, levenshtein_within};
pub use wikitext::strip_wikitext;

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};

/// Lowercased whitespace tokens with leading and trailing punctuation
/// trimmed. Characters inside a token (hyphens, apostrophes) are kept.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| raw.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Bag-of-words embedding representation of one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentFeatures {
    /// In-vocabulary word counts.
    pub counts: BTreeMap<String, u32>,
    /// Count-weighted sum of word vectors.
    pub sum_vector: Vec<f64>,
    pub norm: f64,
    /// `sum_vector / norm`.
    pub unit_vector: Vec<f64>,
    pub in_vocab_tokens: usize,
    pub total_tokens: usize,
}

impl DocumentFeatures {
    pub fn dimension(&self) -> usize {
        self.unit_vector.len()
    }

    pub fn count(&self, word: &str) -> u32 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    /// Fraction of tokens that had no embedding.
    pub fn oov_rate(&self) -> f64 {
        if self.total_tokens == 0 {
            0.0
        } else {
            1.0 - self.in_vocab_tokens as f64 / self.total_tokens as f64
        }
    }
}

/// Tokenizes `text` and builds its embedding-sum features.
///
/// Fails with [`Error::EmptyFeature`] when no token (or only tokens whose
/// vectors cancel to zero) is in the vocabulary.
pub fn featurize(text: &str, table: &EmbeddingTable) -> Result<DocumentFeatures> {
    featurize_tokens(tokenize(text), table)
}

pub fn featurize_tokens<I, S>(tokens: I, table: &EmbeddingTable) -> Result<DocumentFeatures>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
    let mut total_tokens = 0usize;
    for token in tokens {
        total_tokens += 1;
        let token = token.as_ref();
        if table.contains(token) {
            *counts.entry(token.to_lowercase()).or_default() += 1;
        }
    }

    let dim = table.dimension();
    let mut sum_vector = vec![0.0f64; dim];
    // BTreeMap iteration is sorted, which fixes the summation order.
    for (word, &n) in &counts {
        let v = table.lookup(word).expect("counted words are in vocabulary");
        let n = f64::from(n);
        for (s, &x) in sum_vector.iter_mut().zip(v) {
            *s += n * f64::from(x);
        }
    }
    let norm = sum_vector.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::EmptyFeature);
    }
    let unit_vector = sum_vector.iter().map(|x| x / norm).collect();
    let in_vocab_tokens = counts.values().map(|&n| n as usize).sum();

    Ok(DocumentFeatures {
        counts,
        sum_vector,
        norm,
        unit_vector,
        in_vocab_tokens,
        total_tokens,
    })
}
