use std::collections::{BTreeMap, HashMap, HashSet};

use biasrank::analysis::{
    label_ratios, mean_percentile_by_source, percentile_rank_within_groups, score_distribution, timeline as build_timeline,
    NeutralityLabel, TimelinePoint, HISTOGRAM_CSV_HEADER,
};
use biasrank::CorpusRecord;

use super::{read_corpus_nonempty, score_corpus, CliError, CliResult, Ctx};
use crate::args::{DistributionArgs, GroupField, LabelArgs, RankGroupsArgs, TimelineArgs};
use crate::output::{opt_num, Sink};

pub const DOC_PERCENTILE_HEADER: &str = "doc_id,group_id,source_id,score,percentile";
pub const SOURCE_HEADER: &str = "source_id,source_label,mean_percentile,ci_half_width,n";
pub const SUMMARY_HEADER: &str = "group,n,mean,stddev,min,q1,median,q3,max";
pub const LABEL_HEADER: &str = "doc_id,comment_ratio,label";

/// Scored documents of a corpus, dropping those that cannot be scored.
fn scored(ctx: &Ctx, docs: Vec<CorpusRecord>) -> CliResult<Vec<(CorpusRecord, f64)>> {
    let table = ctx.embeddings()?;
    let model = ctx.model(&table)?;
    let scores = score_corpus(&docs, &model, &table)?;
    Ok(docs
        .into_iter()
        .zip(scores)
        .filter_map(|(d, s)| s.map(|s| (d, s)))
        .collect())
}

pub fn rank_groups(ctx: &Ctx, args: RankGroupsArgs) -> CliResult {
    ctx.require(true, true)?;
    let excluded: HashSet<String> = match &args.exclude {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::io(path, e))?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from)
            .collect(),
        None => HashSet::new(),
    };
    let docs: Vec<CorpusRecord> = read_corpus_nonempty(&args.corpus)?
        .into_iter()
        .filter(|d| !excluded.contains(&d.doc_id))
        .collect();
    if docs.is_empty() {
        return Err(CliError::Data("every document is excluded".into()));
    }
    let scored = scored(ctx, docs)?;
    let grouped = scored
        .iter()
        .map(|(d, _)| d.to_grouped())
        .collect::<biasrank::Result<Vec<_>>>()?;
    let scores: HashMap<String, f64> = scored.iter().map(|(d, s)| (d.doc_id.clone(), *s)).collect();
    let percentiles = percentile_rank_within_groups(&grouped, &scores)?;

    let mut out = Sink::create(args.out.as_deref())?;
    out.line(DOC_PERCENTILE_HEADER)?;
    for doc in &grouped {
        out.row(&[
            doc.doc_id.as_str(),
            &doc.group_id,
            &doc.source_id,
            &scores[&doc.doc_id].to_string(),
            &percentiles[&doc.doc_id].to_string(),
        ])?;
    }
    out.finish()?;

    let mut labels: BTreeMap<&str, &str> = BTreeMap::new();
    for doc in &grouped {
        if let Some(label) = &doc.source_label {
            labels.entry(&doc.source_id).or_insert(label);
        }
    }
    let mut sources: Vec<_> = mean_percentile_by_source(&grouped, &percentiles)?.into_iter().collect();
    sources.sort_by(|a, b| b.1.mean.total_cmp(&a.1.mean).then_with(|| a.0.cmp(&b.0)));
    let mut out = match (&args.sources_out, ctx.global.quiet) {
        (Some(path), _) => Sink::create(Some(path))?,
        (None, false) => Sink::stderr(),
        (None, true) => return Ok(()),
    };
    out.line(SOURCE_HEADER)?;
    for (source, summary) in &sources {
        out.row(&[
            source.as_str(),
            labels.get(source.as_str()).copied().unwrap_or(""),
            &summary.mean.to_string(),
            &opt_num(summary.ci_half_width),
            &summary.n.to_string(),
        ])?;
    }
    out.finish()
}

pub fn timeline(ctx: &Ctx, args: TimelineArgs) -> CliResult {
    ctx.require(true, true)?;
    let docs = read_corpus_nonempty(&args.corpus)?;
    if let Some(d) = docs.iter().find(|d| d.timestamp.is_none()) {
        return Err(CliError::Data(format!("document {} has no timestamp", d.doc_id)));
    }
    let points = scored(ctx, docs)?
        .into_iter()
        .map(|(d, score)| {
            Ok(TimelinePoint {
                timestamp: d.parsed_timestamp()?.expect("checked above"),
                quality_score: d.quality_score,
                doc_id: d.doc_id,
                score,
            })
        })
        .collect::<biasrank::Result<Vec<_>>>()?;
    let series = build_timeline(points);

    let mut out = Sink::create(args.out.as_deref())?;
    out.with(|w| series.write_csv(w))?;
    out.finish()?;
    match series.spearman {
        Some(rho) => log::info!(
            "spearman correlation of score with quality score: {rho} over {} points",
            series.n_with_quality
        ),
        None if series.n_with_quality == 0 => log::info!("no quality scores; correlation not computed"),
        None => log::info!(
            "correlation undefined over {} points with quality scores",
            series.n_with_quality
        ),
    }
    if let Some(path) = &args.summary {
        let summary = serde_json::json!({
            "n_points": series.points.len(),
            "n_with_quality": series.n_with_quality,
            "spearman": series.spearman,
        });
        let mut out = Sink::create(Some(path))?;
        out.line(&summary.to_string())?;
        out.finish()?;
    }
    Ok(())
}

pub fn distribution(ctx: &Ctx, args: DistributionArgs) -> CliResult {
    ctx.require(true, true)?;
    let docs = read_corpus_nonempty(&args.corpus)?;
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (doc, score) in scored(ctx, docs)? {
        let key = match args.by {
            None => "all".to_string(),
            Some(GroupField::Group) => doc.group_id.unwrap_or(doc.doc_id),
            Some(GroupField::Source) => doc.source_id.unwrap_or_else(|| "unknown".into()),
            Some(GroupField::Label) => doc.source_label.unwrap_or_else(|| "unknown".into()),
        };
        groups.entry(key).or_default().push(score);
    }
    if groups.is_empty() {
        return Err(CliError::Data("no document could be scored".into()));
    }
    let dists = groups
        .iter()
        .map(|(g, scores)| Ok((g, score_distribution(scores, args.bins as usize)?)))
        .collect::<biasrank::Result<Vec<_>>>()?;

    let mut out = Sink::create(args.out.as_deref())?;
    out.line(HISTOGRAM_CSV_HEADER)?;
    for (group, dist) in &dists {
        for (i, bin) in dist.bins.iter().enumerate() {
            out.row(&[
                group.as_str(),
                &i.to_string(),
                &bin.start.to_string(),
                &bin.end.to_string(),
                &bin.count.to_string(),
            ])?;
        }
    }
    out.finish()?;
    if let Some(path) = &args.summary {
        let mut out = Sink::create(Some(path))?;
        out.line(SUMMARY_HEADER)?;
        for (group, d) in &dists {
            let nums = [d.mean, d.stddev, d.min, d.q1, d.median, d.q3, d.max].map(|x| x.to_string());
            let mut row = vec![group.to_string(), d.n.to_string()];
            row.extend(nums);
            out.row(&row)?;
        }
        out.finish()?;
    }
    Ok(())
}

pub fn label_revisions(_ctx: &Ctx, args: LabelArgs) -> CliResult {
    let docs = read_corpus_nonempty(&args.corpus)?;
    let ratios = docs
        .iter()
        .map(|d| match (d.c_r, d.k) {
            (Some(c), Some(k)) if k > 0 => Ok(f64::from(c) / f64::from(2 * k)),
            _ => Err(CliError::Data(format!("document {} lacks c_r and k", d.doc_id))),
        })
        .collect::<CliResult<Vec<_>>>()?;
    let labels = label_ratios(&ratios);
    let mut out = Sink::create(args.out.as_deref())?;
    out.line(LABEL_HEADER)?;
    for ((doc, ratio), label) in docs.iter().zip(&ratios).zip(&labels) {
        let label = match label {
            NeutralityLabel::Pov => "pov",
            NeutralityLabel::Npov => "npov",
            NeutralityLabel::Unlabeled => "unlabeled",
        };
        out.row(&[doc.doc_id.as_str(), &ratio.to_string(), label])?;
    }
    out.finish()?;
    let count = |l: NeutralityLabel| labels.iter().filter(|&&x| x == l).count();
    log::info!(
        "{} POV, {} NPOV, {} unlabeled",
        count(NeutralityLabel::Pov),
        count(NeutralityLabel::Npov),
        count(NeutralityLabel::Unlabeled)
    );
    Ok(())
}
