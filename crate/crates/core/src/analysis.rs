//! Evaluation metrics and corpus-level analyses of bias scores.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::baselines::Preference;
use crate::error::{Error, Result};
use crate::train::RevisionPair;

/// z-value of a two-sided 95% normal interval.
pub const Z_95: f64 = 1.96;

/// Pairwise accuracy with a 95% normal-approximation interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_pairs: usize,
    pub n_correct: usize,
    pub accuracy: f64,
    pub ci_half_width: f64,
    pub n_skipped: usize,
}

pub const EVAL_CSV_HEADER: &str = "n_pairs,n_correct,accuracy,ci_half_width,n_skipped";

impl EvalReport {
    pub fn from_counts(n_correct: usize, n_pairs: usize, n_skipped: usize) -> Self {
        let accuracy = if n_pairs == 0 { 0.0 } else { n_correct as f64 / n_pairs as f64 };
        Self {
            n_pairs,
            n_correct,
            accuracy,
            ci_half_width: binomial_ci_half_width(accuracy, n_pairs),
            n_skipped,
        }
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.n_pairs, self.n_correct, self.accuracy, self.ci_half_width, self.n_skipped
        )
    }
}

/// `1.96 · sqrt(p (1 − p) / n)`; zero when `n = 0`.
pub fn binomial_ci_half_width(accuracy: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    Z_95 * (accuracy * (1.0 - accuracy) / n as f64).sqrt()
}

/// Scores a classifier on labeled pairs, where `before_text` is always the
/// correct answer. `predict` returns `None` for pairs it cannot judge
/// (e.g. zero-norm features); those are counted as skipped.
pub fn evaluate_pairwise<F>(pairs: &[RevisionPair], mut predict: F) -> Result<EvalReport>
where
    F: FnMut(&RevisionPair) -> Option<Preference>,
{
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (mut n_pairs, mut n_correct, mut n_skipped) = (0, 0, 0);
    for pair in pairs {
        match predict(pair) {
            Some(pref) => {
                n_pairs += 1;
                n_correct += usize::from(pref == Preference::Before);
            }
            None => n_skipped += 1,
        }
    }
    Ok(EvalReport::from_counts(n_correct, n_pairs, n_skipped))
}

/// A scored document that belongs to a group (story) and a source (outlet).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedDocument {
    pub doc_id: String,
    pub group_id: String,
    pub source_id: String,
    pub source_label: Option<String>,
    pub text: String,
    pub timestamp: Option<DateTime<Utc>>,
}

/// Ranks 1..=n with tied values sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Percentile of each document's score within its group:
/// `100 · (rank − 1) / (m − 1)` with average ranks for ties, and 50 for
/// singleton groups.
pub fn percentile_rank_within_groups(
    docs: &[GroupedDocument],
    scores: &HashMap<String, f64>,
) -> Result<BTreeMap<String, f64>> {
    let mut groups: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
    for doc in docs {
        let score = *scores
            .get(&doc.doc_id)
            .ok_or_else(|| Error::MissingScore(doc.doc_id.clone()))?;
        groups.entry(&doc.group_id).or_default().push((&doc.doc_id, score));
    }
    let mut out = BTreeMap::new();
    for members in groups.values() {
        let m = members.len();
        if m == 1 {
            out.insert(members[0].0.to_string(), 50.0);
            continue;
        }
        let values: Vec<f64> = members.iter().map(|(_, s)| *s).collect();
        for ((id, _), rank) in members.iter().zip(average_ranks(&values)) {
            out.insert(id.to_string(), 100.0 * (rank - 1.0) / (m - 1) as f64);
        }
    }
    Ok(out)
}

/// Mean of a sample with a 95% interval `1.96 · s / √n` (`None` for n < 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSummary {
    pub mean: f64,
    pub ci_half_width: Option<f64>,
    pub n: usize,
}

pub fn mean_summary(values: &[f64]) -> Option<MeanSummary> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ci_half_width = (n >= 2).then(|| {
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Z_95 * var.sqrt() / (n as f64).sqrt()
    });
    Some(MeanSummary { mean, ci_half_width, n })
}

/// Mean score per key, e.g. per article, per domain or per document subset.
pub fn mean_by_key<'a, I>(items: I) -> BTreeMap<String, MeanSummary>
where
    I: IntoIterator<Item = (&'a str, f64)>,
{
    let mut buckets: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (key, value) in items {
        buckets.entry(key.to_string()).or_default().push(value);
    }
    buckets
        .into_iter()
        .filter_map(|(k, v)| mean_summary(&v).map(|s| (k, s)))
        .collect()
}

/// Mean within-group percentile per source.
pub fn mean_percentile_by_source(
    docs: &[GroupedDocument],
    percentiles: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, MeanSummary>> {
    let items = docs
        .iter()
        .map(|d| {
            percentiles
                .get(&d.doc_id)
                .map(|&p| (d.source_id.as_str(), p))
                .ok_or_else(|| Error::MissingScore(d.doc_id.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_by_key(items))
}

/// A revision with the number of POV-related comments among the `2k`
/// edits around it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionRecord {
    pub article_id: String,
    pub revision_index: u64,
    pub timestamp: DateTime<Utc>,
    pub text: String,
    pub pov_comment_count: u32,
    pub window: u32,
    pub quality_score: Option<f64>,
}

impl RevisionRecord {
    /// Share of POV comments in the window, `c / 2k`.
    pub fn comment_ratio(&self) -> Result<f64> {
        if self.window == 0 {
            return Err(Error::InvalidConfig("comment window k must be >= 1".into()));
        }
        let slots = 2 * self.window;
        if self.pov_comment_count > slots {
            return Err(Error::InvalidConfig(format!(
                "revision {}/{}: {} POV comments exceed window of {slots}",
                self.article_id, self.revision_index, self.pov_comment_count
            )));
        }
        Ok(f64::from(self.pov_comment_count) / f64::from(slots))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeutralityLabel {
    Pov,
    Npov,
    Unlabeled,
}

/// First and third quartiles by the median-of-halves rule: the lower and
/// upper halves exclude the median when `n` is odd.
pub fn tukey_quartiles(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.len() == 1 {
        return Some((sorted[0], sorted[0]));
    }
    let half = sorted.len() / 2;
    let lower = &sorted[..half];
    let upper = &sorted[sorted.len() - half..];
    Some((median_sorted(lower), median_sorted(upper)))
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Labels revisions in the top quartile of comment ratio as POV and those
/// in the bottom quartile as NPOV. When the quartiles coincide nothing is
/// labeled. Output is aligned with the input.
pub fn label_by_comment_ratio(revisions: &[RevisionRecord]) -> Result<Vec<NeutralityLabel>> {
    if revisions.is_empty() {
        return Err(Error::EmptyInput);
    }
    let ratios = revisions
        .iter()
        .map(RevisionRecord::comment_ratio)
        .collect::<Result<Vec<_>>>()?;
    Ok(label_ratios(&ratios))
}

pub fn label_ratios(ratios: &[f64]) -> Vec<NeutralityLabel> {
    let Some((q1, q3)) = tukey_quartiles(ratios) else {
        return Vec::new();
    };
    ratios
        .iter()
        .map(|&r| {
            if q1 >= q3 {
                NeutralityLabel::Unlabeled
            } else if r >= q3 {
                NeutralityLabel::Pov
            } else if r <= q1 {
                NeutralityLabel::Npov
            } else {
                NeutralityLabel::Unlabeled
            }
        })
        .collect()
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::DegenerateSeries);
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::DegenerateSeries);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub bins: Vec<HistogramBin>,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub stddev: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub const HISTOGRAM_CSV_HEADER: &str = "group,bin,start,end,count";

/// Equal-width histogram over `[min, max]` plus summary statistics. The
/// maximum falls into the last bin; a constant sample fills the first.
pub fn score_distribution(scores: &[f64], bins: usize) -> Result<ScoreDistribution> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    if bins == 0 {
        return Err(Error::InvalidConfig("histogram needs at least one bin".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let width = (max - min) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &s in scores {
        let idx = if max > min {
            (((s - min) / (max - min)) * bins as f64).floor() as usize
        } else {
            0
        };
        counts[idx.min(bins - 1)] += 1;
    }
    let bins = counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            start: min + width * i as f64,
            end: if i + 1 == bins { max } else { min + width * (i + 1) as f64 },
            count,
        })
        .collect();
    let summary = mean_summary(scores).expect("nonempty");
    let n = scores.len();
    let stddev = if n > 1 {
        (scores.iter().map(|x| (x - summary.mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let (q1, q3) = tukey_quartiles(&sorted).expect("nonempty");
    Ok(ScoreDistribution {
        bins,
        n,
        mean: summary.mean,
        stddev,
        min,
        q1,
        median: median_sorted(&sorted),
        q3,
        max,
    })
}

/// One point of a score-over-time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelinePoint {
    pub timestamp: DateTime<Utc>,
    pub doc_id: String,
    pub score: f64,
    pub quality_score: Option<f64>,
}

pub const TIMELINE_CSV_HEADER: &str = "timestamp,doc_id,score,quality_score";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub points: Vec<TimelinePoint>,
    /// Rank correlation of score against quality score, over the points
    /// that carry one. `None` with fewer than two such points.
    pub spearman: Option<f64>,
    pub n_with_quality: usize,
}

/// Sorts points by time (ties by doc id) and correlates scores with the
/// external quality signal where present.
pub fn timeline(mut points: Vec<TimelinePoint>) -> Timeline {
    points.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.doc_id.cmp(&b.doc_id)));
    let (scores, quality): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter_map(|p| p.quality_score.map(|q| (p.score, q)))
        .unzip();
    Timeline {
        spearman: spearman(&scores, &quality).ok(),
        n_with_quality: scores.len(),
        points,
    }
}

impl Timeline {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{TIMELINE_CSV_HEADER}")?;
        for p in &self.points {
            let quality = p.quality_score.map(|q| q.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{}",
                p.timestamp.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true),
                csv_field(&p.doc_id),
                p.score,
                quality
            )?;
        }
        out.flush()
    }
}

/// Quotes a CSV field when it contains a delimiter, quote or newline.
pub fn csv_field(s: &str) -> std::borrow::Cow<'_, str> {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\"")).into()
    } else {
        s.into()
    }
}
