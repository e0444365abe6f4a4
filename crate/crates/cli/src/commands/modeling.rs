use std::fs::File;
use std::io::{BufWriter, Read};
use std::path::{Path, PathBuf};

use biasrank::analysis::{evaluate_pairwise, EVAL_CSV_HEADER};
use biasrank::baselines::{default_lexicon, lexicon_compare, random_compare};
use biasrank::embeddings::corpus_mean;
use biasrank::ingest::read_pairs;
use biasrank::{featurize, fit, save_model, Lexicon, MeanKind, Preference, RankOrder, RevisionPair, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{read_corpus_nonempty, score_corpus, CliError, CliResult, Ctx};
use crate::args::{Baseline, EvalArgs, ExplainArgs, ScoreArgs, TopWordsArgs, TrainArgs};
use crate::output::Sink;

pub fn train(ctx: &Ctx, args: TrainArgs) -> CliResult {
    ctx.require(true, false)?;
    let out = args
        .out
        .clone()
        .or_else(|| ctx.global.model.clone())
        .ok_or_else(|| CliError::Usage("train needs --out or --model".into()))?;
    let log_path = args.log.clone().unwrap_or_else(|| {
        let mut name = out.clone().into_os_string();
        name.push(".log.jsonl");
        PathBuf::from(name)
    });
    let config = TrainConfig {
        learning_rate: args.lr,
        batch_size: args.batch,
        epochs: args.epochs,
        seed: ctx.global.seed,
        variant: args.variant.into(),
        shuffle: !args.no_shuffle,
    };
    config.validate()?;

    let table = ctx.embeddings()?;
    let train = read_pairs(&args.train)?;
    let valid = match &args.valid {
        Some(p) => read_pairs(p)?,
        None => Vec::new(),
    };
    let (model, log) = fit(&train, &valid, &table, &config)?;
    save_model(&model, &out)?;
    let file = File::create(&log_path).map_err(|e| CliError::io(&log_path, e))?;
    log.write_jsonl(BufWriter::new(file))
        .map_err(|e| CliError::io(&log_path, e))?;

    for e in &log.epochs {
        match e.valid_accuracy {
            Some(acc) => log::info!("epoch {:>3}  train_ll {:.6}  valid_acc {:.4}", e.epoch, e.train_ll, acc),
            None => log::info!("epoch {:>3}  train_ll {:.6}", e.epoch, e.train_ll),
        }
    }
    if log.skipped_train_pairs + log.skipped_valid_pairs > 0 {
        log::warn!(
            "skipped {} training and {} validation pairs with an all-out-of-vocabulary member",
            log.skipped_train_pairs,
            log.skipped_valid_pairs
        );
    }
    match log.best_epoch {
        Some(best) => log::info!("kept epoch {best}; model written to {}", out.display()),
        None => log::info!("no epochs run; zero model written to {}", out.display()),
    }
    Ok(())
}

pub fn eval(ctx: &Ctx, args: EvalArgs) -> CliResult {
    let baseline = args.baseline;
    if baseline.is_none() {
        ctx.require(true, true)?;
    }
    if args.lexicon.is_some() && baseline != Some(Baseline::Lexicon) {
        return Err(CliError::Usage("--lexicon only applies to --baseline lexicon".into()));
    }
    let pairs = read_pairs(&args.pairs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.global.seed);

    let predictions: Vec<Option<Preference>> = match baseline {
        Some(Baseline::Random) => pairs.iter().map(|p| Some(random_compare(p, &mut rng))).collect(),
        Some(Baseline::Lexicon) => {
            let lexicon = match &args.lexicon {
                Some(path) => Lexicon::load(path)?,
                None => default_lexicon(),
            };
            log::info!("lexicon {:?} with {} words", lexicon.name, lexicon.len());
            pairs.iter().map(|p| Some(lexicon_compare(p, &lexicon, &mut rng))).collect()
        }
        None => model_predictions(ctx, &pairs, &mut rng)?,
    };

    let mut next = predictions.iter();
    let report = evaluate_pairwise(&pairs, |_| *next.next().expect("one prediction per pair"))?;
    if let Some(path) = &args.predictions {
        write_predictions(path, &pairs, &predictions)?;
    }
    if report.n_skipped > 0 {
        log::warn!("skipped {} pairs with an all-out-of-vocabulary member", report.n_skipped);
    }
    let mut out = Sink::create(args.out.as_deref())?;
    out.line(EVAL_CSV_HEADER)?;
    out.line(&report.to_csv_row())?;
    out.finish()?;
    log::info!(
        "accuracy {:.2}% ± {:.2}% over {} pairs",
        100.0 * report.accuracy,
        100.0 * report.ci_half_width,
        report.n_pairs
    );
    Ok(())
}

/// The higher-scoring member is predicted to be the more biased one; exact
/// ties are broken by a seeded coin flip.
fn model_predictions(ctx: &Ctx, pairs: &[RevisionPair], rng: &mut ChaCha8Rng) -> CliResult<Vec<Option<Preference>>> {
    let table = ctx.embeddings()?;
    let model = ctx.model(&table)?;
    let scores: Vec<Option<(f64, f64)>> = pairs
        .par_iter()
        .map(|p| {
            let before = featurize(&p.before_text, &table).ok()?;
            let after = featurize(&p.after_text, &table).ok()?;
            Some((model.score_document(&before).ok()?, model.score_document(&after).ok()?))
        })
        .collect();
    Ok(scores
        .into_iter()
        .map(|s| {
            s.map(|(sb, sa)| {
                if sb > sa {
                    Preference::Before
                } else if sb < sa {
                    Preference::After
                } else if rng.random::<bool>() {
                    Preference::Before
                } else {
                    Preference::After
                }
            })
        })
        .collect())
}

fn write_predictions(path: &Path, pairs: &[RevisionPair], predictions: &[Option<Preference>]) -> CliResult {
    let mut out = Sink::create(Some(path))?;
    out.line("pair_id,prediction,correct")?;
    for (pair, pred) in pairs.iter().zip(predictions) {
        let (label, correct) = match pred {
            Some(Preference::Before) => ("before", "1"),
            Some(Preference::After) => ("after", "0"),
            None => ("skipped", ""),
        };
        out.row(&[pair.pair_id.as_str(), label, correct])?;
    }
    out.finish()
}

pub fn score(ctx: &Ctx, args: ScoreArgs) -> CliResult {
    ctx.require(true, true)?;
    let table = ctx.embeddings()?;
    let model = ctx.model(&table)?;
    let docs = read_corpus_nonempty(&args.docs)?;
    let scores = score_corpus(&docs, &model, &table)?;
    let mut out = Sink::create(args.out.as_deref())?;
    out.line("doc_id,score")?;
    for (doc, score) in docs.iter().zip(&scores) {
        if let Some(s) = score {
            out.row(&[doc.doc_id.as_str(), &s.to_string()])?;
        }
    }
    out.finish()?;
    let n = scores.iter().flatten().count();
    log::info!("scored {n} of {} documents", docs.len());
    Ok(())
}

pub fn explain(ctx: &Ctx, args: ExplainArgs) -> CliResult {
    ctx.require(true, true)?;
    let table = ctx.embeddings()?;
    let model = ctx.model(&table)?;
    let text = read_text(&args.doc)?;
    let feats = featurize(&text, &table)?;
    let score = model.score_document(&feats)?;
    let mut reports = model.explain_document(&feats, &table)?;
    if let Some(top) = args.top {
        reports.truncate(top);
    }
    let mut out = Sink::create(args.out.as_deref())?;
    out.line("word,count,score")?;
    for r in &reports {
        let count = r.count.unwrap_or(0).to_string();
        out.row(&[r.word.as_str(), &count, &r.score.to_string()])?;
    }
    out.finish()?;
    log::info!(
        "document score {score}; {} of {} tokens in vocabulary; norm {}",
        feats.in_vocab_tokens,
        feats.total_tokens,
        feats.norm
    );
    Ok(())
}

fn read_text(path: &Path) -> CliResult<String> {
    let mut text = String::new();
    if path.as_os_str() == "-" {
        std::io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| CliError::io(path, e))?;
    } else {
        text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    }
    Ok(text)
}

pub fn top_words(ctx: &Ctx, args: TopWordsArgs) -> CliResult {
    ctx.require(true, true)?;
    let table = ctx.embeddings()?;
    let mut model = ctx.model(&table)?;
    if let Some(path) = &args.corpus {
        let docs = read_corpus_nonempty(path)?;
        let feats: Vec<_> = docs
            .par_iter()
            .filter_map(|d| featurize(&d.text, &table).ok())
            .collect();
        let kind = if args.raw_mean { MeanKind::Raw } else { MeanKind::Normalized };
        model.set_mean_vector(corpus_mean(&table, &feats, kind)?)?;
        log::info!("mean vector over {} of {} documents", feats.len(), docs.len());
    } else if args.raw_mean {
        return Err(CliError::Usage("--raw-mean needs --corpus".into()));
    }
    if let Some(path) = &args.save_model {
        save_model(&model, path)?;
    }
    let order = if args.ascending { RankOrder::Ascending } else { RankOrder::Descending };
    let reports = model.top_words(&table, args.n, order)?;
    let mut out = Sink::create(args.out.as_deref())?;
    out.line("rank,word,score")?;
    for (i, r) in reports.iter().enumerate() {
        out.row(&[(i + 1).to_string().as_str(), &r.word, &r.score.to_string()])?;
    }
    out.finish()
}
