use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}: field `{field}`: {reason}")]
    MalformedRow {
        row: usize,
        field: String,
        reason: String,
    },

    #[error("duplicate record id `{0}`")]
    DuplicateId(String),

    #[error("vote list must have odd, non-zero length (got {0})")]
    InvalidVotes(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cell {cell} has {count} records; at least 3 are needed to stratify")]
    CellTooSmall { cell: String, count: usize },

    #[error("text is empty after cleaning")]
    EmptyAfterCleaning,

    #[error("invalid noise pattern on line {line}: {reason}")]
    NoisePattern { line: usize, reason: String },

    #[error("tokenizer backend unavailable: {0}")]
    TokenizerUnavailable(String),

    #[error("parser backend unavailable: {0}")]
    ParserUnavailable(String),

    #[error("encoder backend unavailable: {0}")]
    EncoderUnavailable(String),

    #[error("lexicon unavailable: {0}")]
    LexiconUnavailable(String),

    #[error("unparseable timestamp `{0}`")]
    Timestamp(String),

    #[error("record `{0}` has no word with a domain synonym")]
    NoReplaceableWord(String),

    #[error("no augmentable source record in cell {0}")]
    NoAugmentableSource(String),

    #[error("record `{0}` has no disclosure label")]
    Unlabeled(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("training split is empty")]
    EmptyTrainingSplit,

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("checkpoint file missing: {}", .0.display())]
    MissingCheckpointFile(PathBuf),

    #[error("checkpoint file {} is corrupt: {reason}", file.display())]
    CorruptCheckpoint { file: PathBuf, reason: String },

    #[error("encoder mismatch: checkpoint was trained with {expected}, got {found}")]
    EncoderMismatch { expected: String, found: String },

    #[error("label {0} is not among the declared labels")]
    UnknownLabel(usize),

    #[error("confusion matrix is empty")]
    EmptyMatrix,

    #[error("ROC needs both classes present")]
    SingleClass,

    #[error("class {0} does not occur in y_true")]
    ClassAbsent(usize),

    #[error("vocabulary is empty")]
    EmptyVocabulary,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from invalid user input rather than a failure
    /// while doing the work.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::MalformedRow { .. }
                | Error::DuplicateId(_)
                | Error::InvalidVotes(_)
                | Error::InvalidArgument(_)
                | Error::CellTooSmall { .. }
                | Error::EmptyAfterCleaning
                | Error::NoisePattern { .. }
                | Error::Timestamp(_)
                | Error::Unlabeled(_)
                | Error::UnknownLabel(_)
                | Error::MissingCheckpointFile(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}
