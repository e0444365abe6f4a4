//! Maximum-likelihood fitting of [`BiasModel`] on revision pairs.
//!
//! The objective is the pair log-likelihood `Σ log σ(s_before − s_after)`
//! with no regularization term. Scores are linear in `(U, b)`, so the
//! objective is concave and plain constant-step mini-batch gradient ascent
//! from zero is enough.

use std::collections::HashMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::model::{log_sigmoid, sigmoid, BiasModel, Variant};
use crate::textproc::featurize;

/// Two revisions of one article. `before_text` is the more biased one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionPair {
    pub pair_id: String,
    pub article_id: String,
    pub before_text: String,
    pub after_text: String,
    /// Fields not known to this crate, kept for lossless rewrites.
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl RevisionPair {
    pub fn new(
        pair_id: impl Into<String>,
        article_id: impl Into<String>,
        before_text: impl Into<String>,
        after_text: impl Into<String>,
    ) -> Self {
        Self {
            pair_id: pair_id.into(),
            article_id: article_id.into(),
            before_text: before_text.into(),
            after_text: after_text.into(),
            extra: Default::default(),
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.article_id.is_empty() {
            return Err("article_id is empty".into());
        }
        if self.before_text == self.after_text {
            return Err("before_text and after_text are identical".into());
        }
        Ok(())
    }

    /// The same pair with the roles of the two texts exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            before_text: self.after_text.clone(),
            after_text: self.before_text.clone(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub variant: Variant,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 256,
            epochs: 10,
            seed: 0,
            variant: Variant::Quadratic,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub valid_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.90,
            valid_fraction: 0.05,
            test_fraction: 0.05,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn new(train: f64, valid: f64, test: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            train_fraction: train,
            valid_fraction: valid,
            test_fraction: test,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let fractions = [self.train_fraction, self.valid_fraction, self.test_fraction];
        if fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(Error::InvalidConfig(format!(
                "split fractions must lie in (0, 1), got {fractions:?}"
            )));
        }
        let sum: f64 = fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("split fractions sum to {sum}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub valid: Vec<T>,
    pub test: Vec<T>,
}

/// Splits pairs so that every article's pairs land in a single split.
pub fn split_by_article(pairs: &[RevisionPair], spec: &SplitSpec) -> Result<Split<RevisionPair>> {
    split_grouped(pairs, |p| p.article_id.as_str(), spec)
}

/// Grouped split: groups are shuffled with the seed, then each group goes
/// to the split whose remaining share of items is largest relative to its
/// target (ties favour train, then valid). This keeps small splits from
/// starving when groups are large. Items keep their input order inside
/// each split.
pub fn split_grouped<T: Clone>(items: &[T], group_of: impl Fn(&T) -> &str, spec: &SplitSpec) -> Result<Split<T>> {
    spec.validate()?;
    if items.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut groups: Vec<&str> = Vec::new();
    let mut sizes: HashMap<&str, usize> = HashMap::new();
    for item in items {
        let g = group_of(item);
        let n = sizes.entry(g).or_insert(0);
        if *n == 0 {
            groups.push(g);
        }
        *n += 1;
    }
    groups.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));

    let total = items.len() as f64;
    let targets = [spec.train_fraction, spec.valid_fraction, spec.test_fraction].map(|f| f * total);
    let mut filled = [0usize; 3];
    let mut assignment: HashMap<&str, usize> = HashMap::new();
    for g in groups {
        let mut slot = 0;
        let mut best = f64::NEG_INFINITY;
        for (i, &target) in targets.iter().enumerate() {
            let remaining = (target - filled[i] as f64) / target;
            if remaining > best {
                best = remaining;
                slot = i;
            }
        }
        filled[slot] += sizes[g];
        assignment.insert(g, slot);
    }

    let mut split = Split {
        train: Vec::new(),
        valid: Vec::new(),
        test: Vec::new(),
    };
    for item in items {
        match assignment[group_of(item)] {
            0 => split.train.push(item.clone()),
            1 => split.valid.push(item.clone()),
            _ => split.test.push(item.clone()),
        }
    }
    Ok(split)
}

/// Normalized feature vectors of the two members of a pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFeatures {
    pub before: Vec<f64>,
    pub after: Vec<f64>,
}

/// Featurizes pairs in parallel. Pairs with a zero-norm member are dropped
/// and counted. Output order follows input order.
pub fn featurize_pairs(pairs: &[RevisionPair], table: &EmbeddingTable) -> (Vec<PairFeatures>, usize) {
    let feats: Vec<Option<PairFeatures>> = pairs
        .par_iter()
        .map(|p| {
            let before = featurize(&p.before_text, table).ok()?;
            let after = featurize(&p.after_text, table).ok()?;
            Some(PairFeatures {
                before: before.unit_vector,
                after: after.unit_vector,
            })
        })
        .collect();
    let skipped = feats.iter().filter(|f| f.is_none()).count();
    (feats.into_iter().flatten().collect(), skipped)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikelihood {
    pub value: f64,
    pub n_pairs: usize,
    pub n_skipped: usize,
}

/// `Σ log σ(s_before − s_after)` over every pair whose texts featurize.
pub fn pair_log_likelihood(model: &BiasModel, pairs: &[RevisionPair], table: &EmbeddingTable) -> Result<LogLikelihood> {
    if table.dimension() != model.dimension() {
        return Err(Error::DimensionMismatch {
            expected: model.dimension(),
            found: table.dimension(),
        });
    }
    let (feats, n_skipped) = featurize_pairs(pairs, table);
    if feats.is_empty() {
        return Err(Error::NoUsablePairs { skipped: n_skipped });
    }
    Ok(LogLikelihood {
        value: log_likelihood(model, &feats),
        n_pairs: feats.len(),
        n_skipped,
    })
}

/// Log-likelihood of already featurized pairs.
pub fn log_likelihood(model: &BiasModel, pairs: &[PairFeatures]) -> f64 {
    pairs
        .iter()
        .map(|p| log_sigmoid(model.score_unit(&p.before) - model.score_unit(&p.after)))
        .sum()
}

/// Gradient of the batch log-likelihood with respect to `U` (row-major)
/// and `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub du: Vec<f64>,
    pub db: Vec<f64>,
}

impl Gradient {
    fn zeros(d: usize) -> Self {
        Self {
            du: vec![0.0; d * d],
            db: vec![0.0; d],
        }
    }
}

pub fn gradient(model: &BiasModel, batch: &[PairFeatures]) -> Result<Gradient> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let d = model.dimension();
    if let Some(bad) = batch.iter().find(|p| p.before.len() != d || p.after.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.before.len().max(bad.after.len()),
        });
    }
    let mut grad = Gradient::zeros(d);
    accumulate_gradient(model, batch.iter(), &mut grad);
    Ok(grad)
}

// ∂s/∂U = 2 t̂ t̂ᵀ and ∂s/∂b = t̂, so each pair adds
// (1 − p)·(2 t̂_i t̂_iᵀ − 2 t̂_j t̂_jᵀ) to dU and (1 − p)·(t̂_i − t̂_j) to db.
fn accumulate_gradient<'a>(model: &BiasModel, batch: impl Iterator<Item = &'a PairFeatures>, grad: &mut Gradient) {
    let d = model.dimension();
    let quadratic = model.variant() == Variant::Quadratic;
    for pair in batch {
        let (ti, tj) = (&pair.before, &pair.after);
        let p = sigmoid(model.score_unit(ti) - model.score_unit(tj));
        let c = 1.0 - p;
        if c == 0.0 {
            continue;
        }
        for k in 0..d {
            grad.db[k] += c * (ti[k] - tj[k]);
        }
        if quadratic {
            let c2 = 2.0 * c;
            for r in 0..d {
                let (ai, aj) = (c2 * ti[r], c2 * tj[r]);
                let row = &mut grad.du[r * d..(r + 1) * d];
                for (q, g) in row.iter_mut().enumerate() {
                    *g += ai * ti[q] - aj * tj[q];
                }
            }
        }
    }
}

/// Fraction of pairs whose `before` member scores higher. Ties count half.
pub fn pairwise_accuracy(model: &BiasModel, pairs: &[PairFeatures]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    let credit: f64 = pairs
        .iter()
        .map(|p| {
            let (si, sj) = (model.score_unit(&p.before), model.score_unit(&p.after));
            if si > sj {
                1.0
            } else if si == sj {
                0.5
            } else {
                0.0
            }
        })
        .sum();
    Some(credit / pairs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_ll: f64,
    pub valid_accuracy: Option<f64>,
    pub skipped_pairs: usize,
    /// Weight of any penalty term in the objective. Always zero.
    pub regularization: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned; `None` if no epoch ran.
    pub best_epoch: Option<usize>,
    pub skipped_train_pairs: usize,
    pub skipped_valid_pairs: usize,
}

impl TrainingLog {
    /// One JSON record per epoch, newline-terminated.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for record in &self.epochs {
            serde_json::to_writer(&mut out, record)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }
}

/// Featurizes both pair sets and runs [`fit_features`].
pub fn fit(
    train: &[RevisionPair],
    valid: &[RevisionPair],
    table: &EmbeddingTable,
    config: &TrainConfig,
) -> Result<(BiasModel, TrainingLog)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    let (train_feats, skipped_train) = featurize_pairs(train, table);
    let (valid_feats, skipped_valid) = featurize_pairs(valid, table);
    if train_feats.is_empty() {
        return Err(Error::NoUsablePairs { skipped: skipped_train });
    }
    let (model, mut log) = fit_features(&train_feats, &valid_feats, table.dimension(), config)?;
    log.skipped_train_pairs = skipped_train;
    log.skipped_valid_pairs = skipped_valid;
    for record in &mut log.epochs {
        record.skipped_pairs = skipped_train + skipped_valid;
    }
    Ok((model, log))
}

/// Mini-batch gradient ascent from zero parameters.
///
/// After every epoch the training log-likelihood and validation accuracy
/// are recorded; the parameters of the epoch with the best validation
/// accuracy (latest on ties) are returned. Without validation pairs the
/// last epoch wins.
pub fn fit_features(
    train: &[PairFeatures],
    valid: &[PairFeatures],
    dimension: usize,
    config: &TrainConfig,
) -> Result<(BiasModel, TrainingLog)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    if let Some(bad) = train
        .iter()
        .chain(valid)
        .find(|p| p.before.len() != dimension || p.after.len() != dimension)
    {
        return Err(Error::DimensionMismatch {
            expected: dimension,
            found: bad.before.len().max(bad.after.len()),
        });
    }

    let mut model = BiasModel::zeros(dimension, config.variant)?;
    let mut best = model.clone();
    let mut best_score = f64::NEG_INFINITY;
    let mut log = TrainingLog::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut grad = Gradient::zeros(dimension);

    for epoch in 1..=config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(config.batch_size) {
            grad.du.fill(0.0);
            grad.db.fill(0.0);
            accumulate_gradient(&model, chunk.iter().map(|&i| &train[i]), &mut grad);
            let (u, b) = model.params_mut();
            if config.variant == Variant::Quadratic {
                for (x, g) in u.iter_mut().zip(&grad.du) {
                    *x += config.learning_rate * g;
                }
            }
            for (x, g) in b.iter_mut().zip(&grad.db) {
                *x += config.learning_rate * g;
            }
        }

        let train_ll = log_likelihood(&model, train);
        let valid_accuracy = pairwise_accuracy(&model, valid);
        log::debug!("epoch {epoch}: train_ll={train_ll:.6} valid_accuracy={valid_accuracy:?}");
        log.epochs.push(EpochRecord {
            epoch,
            train_ll,
            valid_accuracy,
            skipped_pairs: 0,
            regularization: 0.0,
        });
        let selection = valid_accuracy.unwrap_or(0.0);
        if selection >= best_score {
            best_score = selection;
            best = model.clone();
            log.best_epoch = Some(epoch);
        }
    }
    Ok((best, log))
}
