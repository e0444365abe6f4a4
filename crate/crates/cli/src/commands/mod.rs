mod dataset;
mod modeling;
mod reports;

use std::fmt;
use std::path::Path;

use biasrank::{featurize, load_embeddings, load_model, BiasModel, CorpusRecord, EmbeddingTable};
use rayon::prelude::*;

use crate::args::{Cli, Command, GlobalArgs};

/// Usage errors exit with 1, data errors with 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

impl From<biasrank::Error> for CliError {
    fn from(e: biasrank::Error) -> Self {
        if e.is_data_error() {
            CliError::Data(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub fn run(cli: Cli) -> CliResult {
    let ctx = Ctx { global: cli.global };
    match cli.command {
        Command::ExtractPairs(a) => dataset::extract_pairs(&ctx, a),
        Command::Split(a) => dataset::split(&ctx, a),
        Command::Train(a) => modeling::train(&ctx, a),
        Command::Eval(a) => modeling::eval(&ctx, a),
        Command::Score(a) => modeling::score(&ctx, a),
        Command::Explain(a) => modeling::explain(&ctx, a),
        Command::TopWords(a) => modeling::top_words(&ctx, a),
        Command::RankGroups(a) => reports::rank_groups(&ctx, a),
        Command::Timeline(a) => reports::timeline(&ctx, a),
        Command::Distribution(a) => reports::distribution(&ctx, a),
        Command::LabelRevisions(a) => reports::label_revisions(&ctx, a),
    }
}

pub struct Ctx {
    pub global: GlobalArgs,
}

impl Ctx {
    /// Checks that the flags a command depends on were given, before any
    /// file is read.
    pub fn require(&self, embeddings: bool, model: bool) -> CliResult {
        if embeddings && self.global.embeddings.is_none() {
            return Err(CliError::Usage("--embeddings is required for this command".into()));
        }
        if model && self.global.model.is_none() {
            return Err(CliError::Usage("--model is required for this command".into()));
        }
        Ok(())
    }

    pub fn embeddings(&self) -> CliResult<EmbeddingTable> {
        let path = self
            .global
            .embeddings
            .as_ref()
            .ok_or_else(|| CliError::Usage("--embeddings is required for this command".into()))?;
        let table = load_embeddings(path, None)?;
        log::info!(
            "loaded {} embeddings of dimension {}",
            table.vocabulary_size(),
            table.dimension()
        );
        Ok(table)
    }

    /// The model, checked against the embedding dimension.
    pub fn model(&self, table: &EmbeddingTable) -> CliResult<BiasModel> {
        let path = self
            .global
            .model
            .as_ref()
            .ok_or_else(|| CliError::Usage("--model is required for this command".into()))?;
        let model = load_model(path)?;
        if model.dimension() != table.dimension() {
            return Err(biasrank::Error::DimensionMismatch {
                expected: model.dimension(),
                found: table.dimension(),
            }
            .into());
        }
        Ok(model)
    }
}

/// Scores documents in parallel. Documents without any in-vocabulary word
/// get `None` and a warning. Output order follows input order.
pub fn score_corpus(docs: &[CorpusRecord], model: &BiasModel, table: &EmbeddingTable) -> CliResult<Vec<Option<f64>>> {
    let scores = docs
        .par_iter()
        .map(|d| match featurize(&d.text, table) {
            Ok(f) => model.score_document(&f).map(Some),
            Err(biasrank::Error::EmptyFeature) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<biasrank::Result<Vec<_>>>()?;
    let skipped: Vec<&str> = docs
        .iter()
        .zip(&scores)
        .filter(|(_, s)| s.is_none())
        .map(|(d, _)| d.doc_id.as_str())
        .collect();
    if !skipped.is_empty() {
        log::warn!(
            "skipped {} document(s) with no in-vocabulary words: {}",
            skipped.len(),
            skipped.join(", ")
        );
    }
    Ok(scores)
}

pub fn read_corpus_nonempty(path: &Path) -> CliResult<Vec<CorpusRecord>> {
    let docs = biasrank::ingest::read_corpus(path)?;
    if docs.is_empty() {
        return Err(CliError::Data(format!("{}: no documents", path.display())));
    }
    Ok(docs)
}
