use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed line {line_no}: {reason}")]
    MalformedLine { line_no: usize, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("embedding table has no valid entries")]
    EmptyTable,

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("document has no in-vocabulary tokens")]
    EmptyFeature,

    #[error("document feature vector has zero norm")]
    ZeroNormDocument,

    #[error("word {0:?} is not in the embedding vocabulary")]
    OutOfVocabulary(String),

    #[error("model has no corpus mean vector; compute one from a corpus first")]
    MeanVectorMissing,

    #[error("unsupported model file version {found:?} (expected {expected:?})")]
    VersionMismatch { expected: String, found: String },

    #[error("corrupt model file: {0}")]
    CorruptFile(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("input is empty")]
    EmptyInput,

    #[error("training set is empty")]
    EmptyTrainSet,

    #[error("batch is empty")]
    EmptyBatch,

    #[error("no usable pairs ({skipped} skipped for zero-norm features)")]
    NoUsablePairs { skipped: usize },

    #[error("no score for document {0:?}")]
    MissingScore(String),

    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("series is too short or constant")]
    DegenerateSeries,

    #[error("revisions of article {article_id:?} are not sorted by timestamp (at revision {revision_id})")]
    UnsortedInput { article_id: String, revision_id: u64 },

    #[error("malformed record at line {line_no}: {reason}\n  {line}")]
    MalformedRecord {
        line_no: usize,
        line: String,
        reason: String,
    },

    #[error("invalid regular expression {pattern:?}: {source}")]
    Regex {
        pattern: String,
        #[source]
        source: regex::Error,
    },

    #[error("HTTP error: status {0}")]
    HttpError(u16),

    #[error("MediaWiki API error {code}: {info}")]
    ApiError { code: String, info: String },

    #[error("network error: {0}")]
    Network(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Data errors are problems with input contents, as opposed to
    /// configuration or usage mistakes.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::InvalidConfig(_))
    }
}
