//! Gradient, concavity and optimizer properties of the pair likelihood.

use biasrank::synth::{planted_pairs, random_model, unit_vocabulary};
use biasrank::train::{featurize_pairs, fit_features, gradient, log_likelihood, pair_log_likelihood, PairFeatures};
use biasrank::{BiasModel, RevisionPair, TrainConfig, Variant};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn random_pairs(rng: &mut ChaCha8Rng, d: usize, n: usize) -> Vec<PairFeatures> {
    (0..n)
        .map(|_| PairFeatures {
            before: unit(rng, d),
            after: unit(rng, d),
        })
        .collect()
}

fn random_params(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> (Vec<f64>, Vec<f64>) {
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| scale * Distribution::<f64>::sample(&StandardNormal, &mut *rng)).collect() };
    (draw(d * d), draw(d))
}

/// `Σ ln σ(s_i − s_j)` with scores evaluated by explicit sums.
fn oracle_ll(u: &[f64], b: &[f64], pairs: &[PairFeatures]) -> f64 {
    let d = b.len();
    let score = |t: &[f64]| {
        let mut s = 0.0;
        for p in 0..d {
            for q in 0..d {
                s += t[p] * (u[p * d + q] + u[q * d + p]) * t[q];
            }
            s += b[p] * t[p];
        }
        s
    };
    pairs
        .iter()
        .map(|p| {
            let x = score(&p.before) - score(&p.after);
            -(-x).exp().ln_1p()
        })
        .sum()
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-12)
}

#[test]
fn gradient_matches_central_differences() {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for seed in 0..25 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 8;
        let pairs = random_pairs(&mut rng, d, 5);
        let (u, b) = random_params(&mut rng, d, 0.5);
        let model = BiasModel::from_parts(Variant::Quadratic, u.clone(), b.clone()).unwrap();
        let g = gradient(&model, &pairs).unwrap();
        for k in 0..d * d {
            let (mut up, mut dn) = (u.clone(), u.clone());
            up[k] += h;
            dn[k] -= h;
            let num = (oracle_ll(&up, &b, &pairs) - oracle_ll(&dn, &b, &pairs)) / (2.0 * h);
            worst = worst.max(rel_err(g.du[k], num));
        }
        for k in 0..d {
            let (mut up, mut dn) = (b.clone(), b.clone());
            up[k] += h;
            dn[k] -= h;
            let num = (oracle_ll(&u, &up, &pairs) - oracle_ll(&u, &dn, &pairs)) / (2.0 * h);
            worst = worst.max(rel_err(g.db[k], num));
        }
    }
    assert!(worst < 1e-5, "worst relative error {worst:e}");
}

#[test]
fn gradient_at_even_odds() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pair = random_pairs(&mut rng, 3, 1);
    let model = BiasModel::zeros(3, Variant::Quadratic).unwrap();
    let g = gradient(&model, &pair).unwrap();
    let (ti, tj) = (&pair[0].before, &pair[0].after);
    for p in 0..3 {
        assert!((g.db[p] - 0.5 * (ti[p] - tj[p])).abs() < 1e-15);
        for q in 0..3 {
            let expected = ti[p] * ti[q] - tj[p] * tj[q];
            assert!((g.du[p * 3 + q] - expected).abs() < 1e-15);
        }
    }

    let same = vec![PairFeatures {
        before: ti.clone(),
        after: ti.clone(),
    }];
    let g = gradient(&model, &same).unwrap();
    assert!(g.du.iter().chain(&g.db).all(|&x| x == 0.0));

    let lin = BiasModel::zeros(3, Variant::Linear).unwrap();
    assert!(gradient(&lin, &pair).unwrap().du.iter().all(|&x| x == 0.0));
    assert!(gradient(&model, &[]).is_err());
}

#[test]
fn likelihood_of_known_difference() {
    // A single pair whose members are the basis vectors, with b picking out
    // a score gap of 1.6.
    let table = biasrank::EmbeddingTable::from_entries(2, [("x", vec![1.0f32, 0.0]), ("y", vec![0.0, 1.0])]).unwrap();
    let model = BiasModel::from_parts(Variant::Linear, vec![0.0; 4], vec![1.6, 0.0]).unwrap();
    let pairs = [RevisionPair::new("1", "a", "x", "y"), RevisionPair::new("2", "a", "zzz", "y")];
    let ll = pair_log_likelihood(&model, &pairs, &table).unwrap();
    assert!((ll.value - (-0.18390)).abs() < 1e-5, "{}", ll.value);
    assert_eq!((ll.n_pairs, ll.n_skipped), (1, 1));

    let zero = BiasModel::zeros(2, Variant::Quadratic).unwrap();
    let ll = pair_log_likelihood(&zero, &pairs[..1], &table).unwrap();
    assert!((ll.value - 0.5f64.ln()).abs() < 1e-15);

    assert!(matches!(
        pair_log_likelihood(&zero, &pairs[1..], &table),
        Err(biasrank::Error::NoUsablePairs { skipped: 1 })
    ));
}

fn full_batch(n: usize, lr: f64, epochs: usize, variant: Variant) -> TrainConfig {
    TrainConfig {
        learning_rate: lr,
        batch_size: n,
        epochs,
        seed: 0,
        variant,
        shuffle: false,
    }
}

#[test]
fn full_batch_ascent_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pairs = random_pairs(&mut rng, 8, 50);
    let (_, log) = fit_features(&pairs, &[], 8, &full_batch(50, 0.001, 200, Variant::Quadratic)).unwrap();
    let start = 50.0 * 0.5f64.ln();
    let lls: Vec<f64> = std::iter::once(start).chain(log.epochs.iter().map(|e| e.train_ll)).collect();
    assert_eq!(lls.len(), 201);
    for w in lls.windows(2) {
        assert!(w[1] >= w[0] - 1e-10, "{} -> {}", w[0], w[1]);
    }
    assert!(lls[200] > lls[0]);
    assert!(log.epochs.iter().all(|e| e.regularization == 0.0));
}

#[test]
fn swapping_pairs_negates_scores() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pairs = random_pairs(&mut rng, 6, 40);
    let swapped: Vec<PairFeatures> = pairs
        .iter()
        .map(|p| PairFeatures {
            before: p.after.clone(),
            after: p.before.clone(),
        })
        .collect();
    let cfg = full_batch(40, 0.05, 100, Variant::Quadratic);
    let (m, _) = fit_features(&pairs, &[], 6, &cfg).unwrap();
    let (ms, _) = fit_features(&swapped, &[], 6, &cfg).unwrap();
    let probes = random_pairs(&mut rng, 6, 20);
    for p in &probes {
        let a = model_score(&m, &p.before);
        let b = model_score(&ms, &p.before);
        assert!((a + b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }
}

fn model_score(m: &BiasModel, t: &[f64]) -> f64 {
    let feats = biasrank::DocumentFeatures {
        counts: Default::default(),
        sum_vector: t.to_vec(),
        norm: 1.0,
        unit_vector: t.to_vec(),
        in_vocab_tokens: 1,
        total_tokens: 1,
    };
    m.score_document(&feats).unwrap()
}

#[test]
fn zero_learning_rate_keeps_zero_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pairs = random_pairs(&mut rng, 4, 30);
    let valid = random_pairs(&mut rng, 4, 10);
    let cfg = TrainConfig {
        learning_rate: 0.0,
        ..TrainConfig::default()
    };
    let (m, log) = fit_features(&pairs, &valid, 4, &cfg).unwrap();
    assert_eq!(m, BiasModel::zeros(4, Variant::Quadratic).unwrap());
    assert!(log.epochs.iter().all(|e| e.valid_accuracy == Some(0.5)));

    let cfg = TrainConfig { epochs: 0, ..cfg };
    let (m, log) = fit_features(&pairs, &valid, 4, &cfg).unwrap();
    assert_eq!(m, BiasModel::zeros(4, Variant::Quadratic).unwrap());
    assert!(log.epochs.is_empty() && log.best_epoch.is_none());
}

#[test]
fn training_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let table = unit_vocabulary(8, 60, &mut rng).unwrap();
    let truth = random_model(8, Variant::Quadratic, 1.0, 1.0, &mut rng).unwrap();
    let pairs = planted_pairs(&truth, &table, 400, 1..=8, 4, &mut rng).unwrap();
    let cfg = TrainConfig {
        batch_size: 32,
        seed: 11,
        ..TrainConfig::default()
    };
    let run = || biasrank::fit(&pairs[..350], &pairs[350..], &table, &cfg).unwrap();
    let (m1, l1) = run();
    let (m2, l2) = run();
    assert_eq!(m1.u().iter().map(|x| x.to_bits()).collect::<Vec<_>>(), m2.u().iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    assert_eq!(m1, m2);
    assert_eq!(l1, l2);
    assert_eq!(l1.epochs.len(), 10);

    let (feats, _) = featurize_pairs(&pairs[..350], &table);
    assert!(log_likelihood(&m1, &feats) > log_likelihood(&BiasModel::zeros(8, Variant::Quadratic).unwrap(), &feats));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn likelihood_is_concave(seed in any::<u64>(), lambda in 0.01f64..0.99) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = rng.random_range(2..6);
        let pairs = random_pairs(&mut rng, d, 10);
        let (u1, b1) = random_params(&mut rng, d, 3.0);
        let (u2, b2) = random_params(&mut rng, d, 3.0);
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect() };
        let ll = |u: Vec<f64>, b: Vec<f64>| log_likelihood(&BiasModel::from_parts(Variant::Quadratic, u, b).unwrap(), &pairs);
        let lhs = ll(mix(&u1, &u2), mix(&b1, &b2));
        let rhs = lambda * ll(u1, b1) + (1.0 - lambda) * ll(u2, b2);
        prop_assert!(lhs >= rhs - 1e-9, "{lhs} < {rhs}");
    }

    #[test]
    fn likelihood_matches_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs = random_pairs(&mut rng, 5, 8);
        let (u, b) = random_params(&mut rng, 5, 1.0);
        let lib = log_likelihood(&BiasModel::from_parts(Variant::Quadratic, u.clone(), b.clone()).unwrap(), &pairs);
        let oracle = oracle_ll(&u, &b, &pairs);
        prop_assert!((lib - oracle).abs() <= 1e-10 * oracle.abs().max(1.0));
        prop_assert!(lib <= 0.0);
    }
}
