//! The pairwise bias model.
//!
//! A document with normalized embedding sum `t̂` gets the score
//!
//! ```text
//! s = t̂ᵀ W t̂ + bᵀ t̂,    W = U + Uᵀ
//! ```
//!
//! and document `i` is judged more biased than `j` with probability
//! `σ(s_i − s_j)`. The same parameters explain a score word by word: the
//! query vector `f = W t̂ + b` gives each word the contribution `fᵀ v_w`, and
//! averaging `t̂` over a corpus gives corpus-level word scores.

mod file;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use file::{load_model, read_model, save_model, write_model, MODEL_MAGIC};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::textproc::DocumentFeatures;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Only the linear term `bᵀ t̂`; `U` stays zero.
    Linear,
    /// Linear plus the quadratic term `t̂ᵀ (U + Uᵀ) t̂`.
    Quadratic,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Linear => "linear",
            Variant::Quadratic => "quadratic",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Variant::Linear),
            "quadratic" => Ok(Variant::Quadratic),
            other => Err(Error::InvalidConfig(format!("unknown model variant {other:?}"))),
        }
    }
}

/// Model parameters. Immutable once built; share freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasModel {
    dimension: usize,
    variant: Variant,
    /// Row-major `d × d`.
    u: Vec<f64>,
    b: Vec<f64>,
    mean_vector: Option<Vec<f64>>,
}

impl BiasModel {
    /// All-zero parameters.
    pub fn zeros(dimension: usize, variant: Variant) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidModel("dimension must be >= 1".into()));
        }
        Ok(Self {
            dimension,
            variant,
            u: vec![0.0; dimension * dimension],
            b: vec![0.0; dimension],
            mean_vector: None,
        })
    }

    /// Builds a model from a row-major `u` (length `d·d`) and `b` (length `d`).
    pub fn from_parts(variant: Variant, u: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let dimension = b.len();
        if dimension == 0 {
            return Err(Error::InvalidModel("dimension must be >= 1".into()));
        }
        if u.len() != dimension * dimension {
            return Err(Error::InvalidModel(format!(
                "U has {} entries, expected {}",
                u.len(),
                dimension * dimension
            )));
        }
        if u.iter().chain(&b).any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel("non-finite parameter".into()));
        }
        if variant == Variant::Linear && u.iter().any(|&x| x != 0.0) {
            return Err(Error::InvalidModel("linear model must have U = 0".into()));
        }
        Ok(Self {
            dimension,
            variant,
            u,
            b,
            mean_vector: None,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Learned matrix `U`, row-major.
    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn mean_vector(&self) -> Option<&[f64]> {
        self.mean_vector.as_deref()
    }

    pub fn set_mean_vector(&mut self, mean: Vec<f64>) -> Result<()> {
        self.check_dim(mean.len())?;
        self.mean_vector = Some(mean);
        Ok(())
    }

    pub fn clear_mean_vector(&mut self) {
        self.mean_vector = None;
    }

    /// `W = U + Uᵀ`, row-major. Exactly symmetric.
    pub fn effective_matrix(&self) -> Vec<f64> {
        let d = self.dimension;
        let mut w = vec![0.0; d * d];
        for p in 0..d {
            for q in 0..d {
                w[p * d + q] = self.u[p * d + q] + self.u[q * d + p];
            }
        }
        w
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.u, &mut self.b)
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found,
            });
        }
        Ok(())
    }

    fn check_features(&self, feats: &DocumentFeatures) -> Result<()> {
        self.check_dim(feats.dimension())?;
        if feats.norm <= 0.0 {
            return Err(Error::ZeroNormDocument);
        }
        Ok(())
    }

    /// `W v + b` for any vector `v` of length `d`.
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dimension;
        let mut out = self.b.clone();
        if self.variant == Variant::Quadratic {
            for p in 0..d {
                let row = &self.u[p * d..(p + 1) * d];
                let mut acc = 0.0;
                for q in 0..d {
                    acc += (row[q] + self.u[q * d + p]) * v[q];
                }
                out[p] += acc;
            }
        }
        out
    }

    /// Score of a unit feature vector. No dimension check.
    pub(crate) fn score_unit(&self, t: &[f64]) -> f64 {
        dot(t, &self.apply(t))
    }

    /// Bias score of a document. Independent of document length.
    pub fn score_document(&self, feats: &DocumentFeatures) -> Result<f64> {
        self.check_features(feats)?;
        Ok(self.score_unit(&feats.unit_vector))
    }

    /// Probability that document `i` is more biased than document `j`.
    pub fn pair_probability(&self, feats_i: &DocumentFeatures, feats_j: &DocumentFeatures) -> Result<f64> {
        Ok(sigmoid(self.score_document(feats_i)? - self.score_document(feats_j)?))
    }

    /// Query vector `f = W t̂ + b` of a document.
    pub fn query_vector(&self, feats: &DocumentFeatures) -> Result<Vec<f64>> {
        self.check_features(feats)?;
        Ok(self.apply(&feats.unit_vector))
    }

    /// Contribution of `word` to the score of the document with features
    /// `feats`. The word need not occur in the document; its count is then 0.
    pub fn word_bias_in_context(
        &self,
        feats: &DocumentFeatures,
        word: &str,
        table: &EmbeddingTable,
    ) -> Result<WordBiasReport> {
        let query = self.query_vector(feats)?;
        self.check_dim(table.dimension())?;
        let word = word.to_lowercase();
        let v = table
            .lookup(&word)
            .ok_or_else(|| Error::OutOfVocabulary(word.clone()))?;
        Ok(WordBiasReport {
            count: Some(feats.count(&word)),
            score: dot_f32(&query, v),
            kind: ScoreKind::Contextual,
            word,
        })
    }

    /// Contextual scores of every word occurring in the document, highest
    /// first (ties by word).
    pub fn explain_document(&self, feats: &DocumentFeatures, table: &EmbeddingTable) -> Result<Vec<WordBiasReport>> {
        let query = self.query_vector(feats)?;
        self.check_dim(table.dimension())?;
        let mut reports = feats
            .counts
            .iter()
            .map(|(word, &count)| {
                let v = table
                    .lookup(word)
                    .ok_or_else(|| Error::OutOfVocabulary(word.clone()))?;
                Ok(WordBiasReport {
                    word: word.clone(),
                    kind: ScoreKind::Contextual,
                    score: dot_f32(&query, v),
                    count: Some(count),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        sort_reports(&mut reports, RankOrder::Descending);
        Ok(reports)
    }

    /// Direction whose dot product with `v_w` gives the corpus-level word
    /// score: `W t̄ + b`.
    pub fn general_query(&self) -> Result<Vec<f64>> {
        let mean = self.mean_vector.as_deref().ok_or(Error::MeanVectorMissing)?;
        Ok(self.apply(mean))
    }

    /// Corpus-level bias score of `word`: the average over the corpus of
    /// its contextual score.
    pub fn general_word_bias(&self, word: &str, table: &EmbeddingTable) -> Result<WordBiasReport> {
        let query = self.general_query()?;
        self.check_dim(table.dimension())?;
        let word = word.to_lowercase();
        let v = table
            .lookup(&word)
            .ok_or_else(|| Error::OutOfVocabulary(word.clone()))?;
        Ok(WordBiasReport {
            score: dot_f32(&query, v),
            kind: ScoreKind::General,
            count: None,
            word,
        })
    }

    /// The `n` vocabulary words with the highest (or lowest) corpus-level
    /// score, ties broken by word.
    pub fn top_words(&self, table: &EmbeddingTable, n: usize, order: RankOrder) -> Result<Vec<WordBiasReport>> {
        let query = self.general_query()?;
        self.check_dim(table.dimension())?;
        let mut reports: Vec<WordBiasReport> = table
            .iter()
            .map(|(word, v)| WordBiasReport {
                word: word.to_string(),
                kind: ScoreKind::General,
                score: dot_f32(&query, v),
                count: None,
            })
            .collect();
        sort_reports(&mut reports, order);
        reports.truncate(n);
        Ok(reports)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankOrder {
    #[default]
    Descending,
    Ascending,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    /// Contribution within one document.
    Contextual,
    /// Average contribution over a corpus.
    General,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordBiasReport {
    pub word: String,
    pub kind: ScoreKind,
    pub score: f64,
    /// Occurrences in the queried document; `None` for general scores.
    pub count: Option<u32>,
}

fn sort_reports(reports: &mut [WordBiasReport], order: RankOrder) {
    reports.sort_by(|a, b| {
        let by_score = a.score.partial_cmp(&b.score).unwrap_or(Ordering::Equal);
        let by_score = match order {
            RankOrder::Descending => by_score.reverse(),
            RankOrder::Ascending => by_score,
        };
        by_score.then_with(|| a.word.cmp(&b.word))
    });
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dot_f32(a: &[f64], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, &y)| x * f64::from(y)).sum()
}

/// Logistic function, evaluated without overflow for any finite input.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(x)`, stable for large `|x|`.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}
