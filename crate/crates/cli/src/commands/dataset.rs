use std::path::PathBuf;

use biasrank::ingest::{extract_pairs as extract, read_pairs, read_revisions, write_jsonl, write_pairs, RevisionMeta};
use biasrank::train::split_by_article;
use biasrank::{PovRegexSet, SplitSpec};

use super::{CliError, CliResult, Ctx};
use crate::args::{ExtractPairsArgs, SplitArgs};
use crate::output::Sink;

pub fn extract_pairs(_ctx: &Ctx, args: ExtractPairsArgs) -> CliResult {
    let regexes = match &args.regexes {
        Some(p) => PovRegexSet::load(p)?,
        None => PovRegexSet::default(),
    };
    let revisions = match (&args.revisions, &args.fetch) {
        (Some(path), _) => read_revisions(path)?,
        (None, Some(title)) => fetch(title, &args)?,
        (None, None) => return Err(CliError::Usage("either --revisions or --fetch is required".into())),
    };
    if revisions.is_empty() {
        return Err(CliError::Data("no revisions in input".into()));
    }
    let extraction = extract(&revisions, &regexes, args.min_distance)?;
    let mut out = Sink::create(args.out.as_deref())?;
    out.with(|w| write_jsonl(&extraction.pairs, w))?;
    out.finish()?;
    let s = extraction.stats;
    log::info!(
        "scanned {} revisions, {} POV-matched, {} without parent, {} below distance {}, {} pairs emitted",
        s.scanned,
        s.matched,
        s.missing_parent,
        s.distance_filtered,
        args.min_distance,
        s.emitted
    );
    Ok(())
}

#[cfg(feature = "mediawiki")]
fn fetch(title: &str, args: &ExtractPairsArgs) -> CliResult<Vec<RevisionMeta>> {
    use biasrank::ingest::mediawiki::{fetch_revisions, FetchConfig};

    let o = &args.fetch_opts;
    let endpoint = o
        .endpoint
        .clone()
        .ok_or_else(|| CliError::Usage("--fetch needs --endpoint".into()))?;
    if o.requests_per_second.is_nan() || o.requests_per_second <= 0.0 {
        return Err(CliError::Usage("--requests-per-second must be positive".into()));
    }
    let mut config = FetchConfig::new(endpoint);
    if let Some(ua) = &o.user_agent {
        config.user_agent = ua.clone();
    }
    config.requests_per_second = o.requests_per_second;
    config.max_retries = o.max_retries;
    config.max_revisions = o.max_revisions;
    config.checkpoint = o.checkpoint.clone();
    config.cache_dir = o.cache_dir.clone();
    let revisions = fetch_revisions(title, config)?;
    log::info!("fetched {} revisions of {title}", revisions.len());
    if let Some(path) = &o.save_revisions {
        biasrank::ingest::write_revisions(&revisions, path)?;
    }
    Ok(revisions)
}

#[cfg(not(feature = "mediawiki"))]
fn fetch(_title: &str, _args: &ExtractPairsArgs) -> CliResult<Vec<RevisionMeta>> {
    Err(CliError::Usage("this build has no network client; use --revisions".into()))
}

pub fn split(ctx: &Ctx, args: SplitArgs) -> CliResult {
    let spec = SplitSpec::new(args.ratios[0], args.ratios[1], args.ratios[2], ctx.global.seed)?;
    let pairs = read_pairs(&args.pairs)?;
    let split = split_by_article(&pairs, &spec)?;
    // A prefix such as `data/` names a directory that may not exist yet.
    let parent = PathBuf::from(format!("{}x", args.out_prefix));
    if let Some(dir) = parent.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    for (name, part) in [("train", &split.train), ("valid", &split.valid), ("test", &split.test)] {
        let path = PathBuf::from(format!("{}{name}.jsonl", args.out_prefix));
        write_pairs(part, &path)?;
        log::info!("{name}: {} pairs -> {}", part.len(), path.display());
    }
    Ok(())
}
