//! Dataset construction: POV-edit detection, revision pair extraction and
//! the line-delimited record formats.

#[cfg(feature = "mediawiki")]
pub mod mediawiki;
mod records;

use std::collections::HashMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use regex::{Regex, RegexSet, RegexSetBuilder};
use serde::{Deserialize, Serialize};

pub use records::{
    read_corpus, read_corpus_from, read_jsonl, read_pairs, read_pairs_from, read_revisions, read_revisions_from,
    write_corpus, write_jsonl, write_pairs, write_revisions, CorpusRecord, JsonlWriter,
};

use crate::error::{Error, Result};
use crate::textproc::{levenshtein_within, strip_wikitext};
use crate::train::RevisionPair;

/// One revision of an article, as returned by a revision-history query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionMeta {
    pub article_id: String,
    pub revision_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_revision_id: Option<u64>,
    pub timestamp: DateTime<Utc>,
    #[serde(default)]
    pub comment: String,
    #[serde(default)]
    pub text: String,
}

/// Case-insensitive patterns that mark an edit comment as POV-related.
#[derive(Debug, Clone)]
pub struct PovRegexSet {
    patterns: Vec<String>,
    set: RegexSet,
}

/// Stand-in default patterns: word-bounded `pov`, `npov`, `neutral` and
/// `point of view`.
pub const DEFAULT_POV_PATTERNS: &str = include_str!("../../data/pov_regexes.txt");

impl PovRegexSet {
    pub fn new<I, S>(patterns: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let patterns: Vec<String> = patterns.into_iter().map(Into::into).collect();
        if patterns.is_empty() {
            return Err(Error::InvalidConfig("POV regex set is empty".into()));
        }
        for p in &patterns {
            Regex::new(p).map_err(|source| Error::Regex {
                pattern: p.clone(),
                source,
            })?;
        }
        let set = RegexSetBuilder::new(&patterns)
            .case_insensitive(true)
            .build()
            .map_err(|source| Error::Regex {
                pattern: patterns.join(" | "),
                source,
            })?;
        Ok(Self { patterns, set })
    }

    /// One pattern per line; blank lines and lines starting with `#` are
    /// skipped.
    pub fn parse(text: &str) -> Result<Self> {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(String::from),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn patterns(&self) -> &[String] {
        &self.patterns
    }

    pub fn is_match(&self, comment: &str) -> bool {
        self.set.is_match(comment)
    }
}

impl Default for PovRegexSet {
    fn default() -> Self {
        Self::parse(DEFAULT_POV_PATTERNS).expect("bundled POV patterns compile")
    }
}

pub fn is_pov_edit(comment: &str, regexes: &PovRegexSet) -> bool {
    regexes.is_match(comment)
}

pub const DEFAULT_MIN_DISTANCE: usize = 10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionStats {
    pub scanned: usize,
    pub matched: usize,
    /// POV edits whose parent revision is not in the input.
    pub missing_parent: usize,
    /// POV edits dropped for being closer than the distance threshold.
    pub distance_filtered: usize,
    pub emitted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub pairs: Vec<RevisionPair>,
    pub stats: ExtractionStats,
}

/// Builds `(parent, revision)` pairs around POV-related edits.
///
/// Revisions may cover several articles but must be in timestamp order
/// within each article. Both texts are stripped to plain text and the pair
/// is kept only if they are at least `min_distance` character edits apart
/// (and never when identical). The pair id is the edit's revision id.
pub fn extract_pairs(revisions: &[RevisionMeta], regexes: &PovRegexSet, min_distance: usize) -> Result<Extraction> {
    let mut by_id: HashMap<(&str, u64), &RevisionMeta> = HashMap::new();
    let mut last_seen: HashMap<&str, DateTime<Utc>> = HashMap::new();
    for rev in revisions {
        if let Some(prev) = last_seen.insert(&rev.article_id, rev.timestamp) {
            if rev.timestamp < prev {
                return Err(Error::UnsortedInput {
                    article_id: rev.article_id.clone(),
                    revision_id: rev.revision_id,
                });
            }
        }
        by_id.insert((&rev.article_id, rev.revision_id), rev);
    }

    let mut stats = ExtractionStats {
        scanned: revisions.len(),
        ..Default::default()
    };
    let mut candidates = Vec::new();
    for rev in revisions {
        if !regexes.is_match(&rev.comment) {
            continue;
        }
        stats.matched += 1;
        match rev
            .parent_revision_id
            .and_then(|pid| by_id.get(&(rev.article_id.as_str(), pid)))
        {
            Some(parent) => candidates.push((*parent, rev)),
            None => stats.missing_parent += 1,
        }
    }

    let pairs: Vec<Option<RevisionPair>> = candidates
        .par_iter()
        .map(|(parent, rev)| {
            let before = strip_wikitext(&parent.text);
            let after = strip_wikitext(&rev.text);
            let far_enough = before != after
                && (min_distance == 0 || levenshtein_within(&before, &after, min_distance - 1).is_none());
            far_enough.then(|| RevisionPair::new(rev.revision_id.to_string(), rev.article_id.clone(), before, after))
        })
        .collect();
    stats.distance_filtered = pairs.iter().filter(|p| p.is_none()).count();
    let pairs: Vec<RevisionPair> = pairs.into_iter().flatten().collect();
    stats.emitted = pairs.len();
    Ok(Extraction { pairs, stats })
}
