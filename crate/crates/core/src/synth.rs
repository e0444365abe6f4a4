//! Synthetic corpora drawn from a known model, for tests and benchmarks.

use std::ops::RangeInclusive;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::model::{sigmoid, BiasModel, Variant};
use crate::textproc::featurize;
use crate::train::RevisionPair;

/// `n` words `w0000`, `w0001`, ... with independent uniformly random unit
/// vectors.
pub fn unit_vocabulary<R: Rng + ?Sized>(dimension: usize, n: usize, rng: &mut R) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::with_dimension(dimension)?;
    for i in 0..n {
        let v: Vec<f64> = (0..dimension).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let v: Vec<f32> = v.iter().map(|x| (x / norm) as f32).collect();
        table.insert(&format!("w{i:04}"), &v)?;
    }
    Ok(table)
}

/// Parameters with i.i.d. normal entries. `u_scale` is ignored for the
/// linear variant.
pub fn random_model<R: Rng + ?Sized>(
    dimension: usize,
    variant: Variant,
    u_scale: f64,
    b_scale: f64,
    rng: &mut R,
) -> Result<BiasModel> {
    let mut normal = |scale: f64| -> f64 { scale * Distribution::<f64>::sample(&StandardNormal, rng) };
    let u: Vec<f64> = match variant {
        Variant::Quadratic => (0..dimension * dimension).map(|_| normal(u_scale)).collect(),
        Variant::Linear => vec![0.0; dimension * dimension],
    };
    let b = (0..dimension).map(|_| normal(b_scale)).collect();
    BiasModel::from_parts(variant, u, b)
}

/// Space-separated words drawn uniformly with replacement.
pub fn random_document<R: Rng + ?Sized>(words: &[&str], length: RangeInclusive<usize>, rng: &mut R) -> String {
    let n = rng.random_range(length);
    (0..n)
        .map(|_| *words.choose(rng).expect("nonempty vocabulary"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Pairs of random documents labelled by sampling from the model: the first
/// document is "before" with probability `σ(s_a − s_b)`. Consecutive runs
/// of `pairs_per_article` pairs share an article id.
pub fn planted_pairs<R: Rng + ?Sized>(
    model: &BiasModel,
    table: &EmbeddingTable,
    n: usize,
    length: RangeInclusive<usize>,
    pairs_per_article: usize,
    rng: &mut R,
) -> Result<Vec<RevisionPair>> {
    if table.dimension() != model.dimension() {
        return Err(Error::DimensionMismatch {
            expected: model.dimension(),
            found: table.dimension(),
        });
    }
    if *length.start() == 0 || table.is_empty() || pairs_per_article == 0 {
        return Err(Error::InvalidConfig("planted pairs need nonempty documents and articles".into()));
    }
    let words: Vec<&str> = table.words().collect();
    let mut pairs = Vec::with_capacity(n);
    while pairs.len() < n {
        let a = random_document(&words, length.clone(), rng);
        let b = random_document(&words, length.clone(), rng);
        if a == b {
            continue;
        }
        let sa = model.score_document(&featurize(&a, table)?)?;
        let sb = model.score_document(&featurize(&b, table)?)?;
        let a_first = rng.random::<f64>() < sigmoid(sa - sb);
        let (before, after) = if a_first { (a, b) } else { (b, a) };
        let i = pairs.len();
        pairs.push(RevisionPair::new(
            format!("p{i}"),
            format!("a{}", i / pairs_per_article),
            before,
            after,
        ));
    }
    Ok(pairs)
}
