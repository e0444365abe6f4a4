//! Algebraic identities of the scoring model on random documents and
//! parameters, checked against brute-force evaluations.

use biasrank::embeddings::corpus_mean_normalized;
use biasrank::model::{load_model, save_model, RankOrder};
use biasrank::synth::{random_document, random_model, unit_vocabulary};
use biasrank::{featurize, BiasModel, DocumentFeatures, EmbeddingTable, Variant};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const D: usize = 16;

struct Fixture {
    table: EmbeddingTable,
    model: BiasModel,
    docs: Vec<(String, DocumentFeatures)>,
}

fn fixture(seed: u64, n_docs: usize) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = unit_vocabulary(D, 300, &mut rng).unwrap();
    let scale = rng.random_range(0.1..5.0);
    let model = random_model(D, Variant::Quadratic, scale, scale, &mut rng).unwrap();
    let words: Vec<&str> = table.words().collect();
    let docs = (0..n_docs)
        .map(|_| {
            let text = random_document(&words, 1..=40, &mut rng);
            let feats = featurize(&text, &table).unwrap();
            (text, feats)
        })
        .collect();
    Fixture { table, model, docs }
}

/// `t̂ᵀ(U + Uᵀ)t̂ + bᵀt̂` by explicit double sum.
fn brute_score(u: &[f64], b: &[f64], t: &[f64]) -> f64 {
    let d = b.len();
    let mut s = 0.0;
    for p in 0..d {
        for q in 0..d {
            s += t[p] * (u[p * d + q] + u[q * d + p]) * t[q];
        }
        s += b[p] * t[p];
    }
    s
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn symmetrized(model: &BiasModel) -> BiasModel {
    let d = model.dimension();
    let u = model.u();
    let half: Vec<f64> = (0..d * d)
        .map(|k| {
            let (p, q) = (k / d, k % d);
            (u[p * d + q] + u[q * d + p]) / 2.0
        })
        .collect();
    BiasModel::from_parts(model.variant(), half, model.b().to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn score_matches_brute_force(seed in any::<u64>()) {
        let f = fixture(seed, 30);
        for (_, feats) in &f.docs {
            let s = f.model.score_document(feats).unwrap();
            prop_assert!(close(s, brute_score(f.model.u(), f.model.b(), &feats.unit_vector), 1e-12));
        }
    }

    #[test]
    fn decomposition_identity(seed in any::<u64>()) {
        let f = fixture(seed, 100);
        for (_, feats) in &f.docs {
            let s = f.model.score_document(feats).unwrap();
            let total: f64 = feats
                .counts
                .iter()
                .map(|(w, &n)| f64::from(n) * f.model.word_bias_in_context(feats, w, &f.table).unwrap().score)
                .sum();
            prop_assert!(close(total / feats.norm, s, 1e-9), "{} vs {}", total / feats.norm, s);

            let explained: f64 = f
                .model
                .explain_document(feats, &f.table)
                .unwrap()
                .iter()
                .map(|r| f64::from(r.count.unwrap()) * r.score)
                .sum();
            prop_assert!(close(explained / feats.norm, s, 1e-9));

            let query = f.model.query_vector(feats).unwrap();
            let via_query: f64 = query.iter().zip(&feats.sum_vector).map(|(a, b)| a * b).sum::<f64>() / feats.norm;
            prop_assert!(close(via_query, s, 1e-9));
        }
    }

    #[test]
    fn antisymmetry(seed in any::<u64>()) {
        let f = fixture(seed, 100);
        for pair in f.docs.windows(2) {
            let (a, b) = (&pair[0].1, &pair[1].1);
            let p = f.model.pair_probability(a, b).unwrap() + f.model.pair_probability(b, a).unwrap();
            prop_assert!((p - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn self_concatenation(seed in any::<u64>()) {
        let f = fixture(seed, 100);
        for (text, feats) in &f.docs {
            let twice = featurize(&format!("{text} {text}"), &f.table).unwrap();
            let (s1, s2) = (f.model.score_document(feats).unwrap(), f.model.score_document(&twice).unwrap());
            prop_assert!((s1 - s2).abs() <= 1e-12 * s1.abs().max(1.0));
            prop_assert!(close(twice.norm, 2.0 * feats.norm, 1e-12));
        }
    }

    #[test]
    fn only_symmetric_part_is_observable(seed in any::<u64>()) {
        let mut f = fixture(seed, 100);
        let feats: Vec<DocumentFeatures> = f.docs.iter().map(|d| d.1.clone()).collect();
        let mean = corpus_mean_normalized(&f.table, &feats).unwrap();
        f.model.set_mean_vector(mean).unwrap();
        let sym = symmetrized(&f.model);
        let mut sym = sym;
        sym.set_mean_vector(f.model.mean_vector().unwrap().to_vec()).unwrap();
        let tol = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        for pair in feats.windows(2) {
            prop_assert!(tol(f.model.score_document(&pair[0]).unwrap(), sym.score_document(&pair[0]).unwrap()));
            prop_assert!(tol(
                f.model.pair_probability(&pair[0], &pair[1]).unwrap(),
                sym.pair_probability(&pair[0], &pair[1]).unwrap()
            ));
            for w in pair[0].counts.keys().take(5) {
                prop_assert!(tol(
                    f.model.word_bias_in_context(&pair[0], w, &f.table).unwrap().score,
                    sym.word_bias_in_context(&pair[0], w, &f.table).unwrap().score
                ));
            }
        }
        for w in f.table.words().take(50) {
            prop_assert!(tol(
                f.model.general_word_bias(w, &f.table).unwrap().score,
                sym.general_word_bias(w, &f.table).unwrap().score
            ));
        }
    }

    #[test]
    fn general_score_is_average_contextual_score(seed in any::<u64>()) {
        let mut f = fixture(seed, 100);
        let feats: Vec<DocumentFeatures> = f.docs.iter().map(|d| d.1.clone()).collect();
        f.model.set_mean_vector(corpus_mean_normalized(&f.table, &feats).unwrap()).unwrap();
        for w in f.table.words().step_by(7) {
            let avg = feats
                .iter()
                .map(|t| f.model.word_bias_in_context(t, w, &f.table).unwrap().score)
                .sum::<f64>()
                / feats.len() as f64;
            let gb = f.model.general_word_bias(w, &f.table).unwrap().score;
            prop_assert!(close(avg, gb, 1e-9), "{avg} vs {gb}");
        }
    }

    #[test]
    fn quadratic_with_zero_u_equals_linear(seed in any::<u64>()) {
        let f = fixture(seed, 50);
        let b = f.model.b().to_vec();
        let lin = BiasModel::from_parts(Variant::Linear, vec![0.0; D * D], b.clone()).unwrap();
        let quad = BiasModel::from_parts(Variant::Quadratic, vec![0.0; D * D], b).unwrap();
        for (_, feats) in &f.docs {
            prop_assert_eq!(lin.score_document(feats).unwrap(), quad.score_document(feats).unwrap());
            prop_assert_eq!(lin.query_vector(feats).unwrap(), quad.query_vector(feats).unwrap());
        }
    }

    #[test]
    fn mean_vector_norm_at_most_one(seed in any::<u64>()) {
        let f = fixture(seed, 20);
        let feats: Vec<DocumentFeatures> = f.docs.iter().map(|d| d.1.clone()).collect();
        let mean = corpus_mean_normalized(&f.table, &feats).unwrap();
        prop_assert_eq!(mean.len(), D);
        prop_assert!(mean.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1.0 + 1e-12);
    }

    #[test]
    fn model_file_roundtrip(seed in any::<u64>()) {
        let mut f = fixture(seed, 5);
        let feats: Vec<DocumentFeatures> = f.docs.iter().map(|d| d.1.clone()).collect();
        f.model.set_mean_vector(corpus_mean_normalized(&f.table, &feats).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        save_model(&f.model, &path).unwrap();
        prop_assert_eq!(load_model(&path).unwrap(), f.model);
    }
}

#[test]
fn planted_intercept_ranks_first() {
    let words = ["excellent", "table", "river", "seven"];
    let table = EmbeddingTable::from_entries(
        4,
        words.iter().enumerate().map(|(i, w)| {
            let mut v = vec![0.0f32; 4];
            v[i] = 1.0;
            (*w, v)
        }),
    )
    .unwrap();
    let mut model = BiasModel::from_parts(Variant::Linear, vec![0.0; 16], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    model.set_mean_vector(vec![0.25; 4]).unwrap();
    let top = model.top_words(&table, 10, RankOrder::Descending).unwrap();
    assert_eq!(top[0].word, "excellent");
    let rest: Vec<&str> = top[1..].iter().map(|r| r.word.as_str()).collect();
    assert_eq!(rest, ["river", "seven", "table"]);
}

#[test]
fn scoring_with_wrong_dimension_fails() {
    let f = fixture(3, 1);
    let small = unit_vocabulary(4, 10, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let feats = featurize("w0001 w0002", &small).unwrap();
    assert!(matches!(
        f.model.score_document(&feats),
        Err(biasrank::Error::DimensionMismatch { expected: 16, found: 4 })
    ));
}
