use std::path::PathBuf;

use thiserror::Error;

use crate::report::SentenceRef;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    // report ingestion
    #[error("report text is empty")]
    EmptyReport,
    #[error("invalid report: {0}")]
    InvalidReport(String),
    #[error("malformed corpus record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate report id `{0}`")]
    DuplicateReportId(String),
    #[error("bad head index at line {0}")]
    BadHeadIndex(usize),
    #[error("token count mismatch for sentence {0}")]
    TokenCountMismatch(SentenceRef),
    #[error("duplicate dependency graph for sentence {0}")]
    DuplicateSentence(SentenceRef),
    #[error("sentence {0} does not exist in the corpus")]
    UnknownSentence(SentenceRef),
    #[error("invalid edge {head} -> {dependent}: {reason}")]
    InvalidEdge {
        head: usize,
        dependent: usize,
        reason: &'static str,
    },

    // lexicon and mentions
    #[error("bad CUI `{cui}` at line {line}")]
    BadCui { line: usize, cui: String },
    #[error("duplicate lexicon entry ({cui}, `{phrase}`)")]
    DuplicateEntry { cui: String, phrase: String },
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("mention span [{start}, {end}] out of range for sentence {sentence}")]
    SpanOutOfRange {
        sentence: SentenceRef,
        start: usize,
        end: usize,
    },

    // rules
    #[error("rule parse error at line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("unknown edge direction `{direction}` at line {line}")]
    UnknownDirection { line: usize, direction: String },

    // labeling
    #[error("no dependency graph for sentence {0}")]
    MissingGraph(SentenceRef),
    #[error("report `{report_id}`: {source}")]
    Report {
        report_id: String,
        #[source]
        source: Box<Error>,
    },

    // numeric kernel
    #[error("pooling parameter r must be positive")]
    NonPositiveR,
    #[error("pooling region is empty")]
    EmptyRegion,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("batch has no positive or no negative labels")]
    DegenerateBatch,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("non-finite value: {0}")]
    NonFinite(&'static str),

    // localization and evaluation
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("detection box has zero area")]
    ZeroAreaDetection,
    #[error("predicted and gold report id sets differ")]
    IdSetMismatch,
    #[error("AUC needs at least one positive and one negative label")]
    DegenerateLabels,
    #[error("threshold {0} out of range")]
    InvalidThreshold(f64),

    // stats
    #[error("no patients to split")]
    EmptyCorpus,
    #[error("split fractions must be positive and sum to 1")]
    InvalidFractions,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn row(line: usize, reason: impl Into<String>) -> Self {
        Error::MalformedRow {
            line,
            reason: reason.into(),
        }
    }
}

pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
