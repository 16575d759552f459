use thiserror::Error;

/// Errors produced by parsing, training, and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    /// A data file violated its format; carries the 1-based line number.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("word not in lexicon: {0:?}")]
    MissingWord(String),

    #[error("corpus contains no tokens")]
    EmptyCorpus,

    #[error("vocabulary is empty after pruning; lower --min-count or provide more data")]
    EmptyVocabulary,

    #[error("unknown training mode {0:?}; expected top, intra, inter, or hybrid")]
    UnknownMode(String),

    #[error("incompatible warm-start model: {0}")]
    WarmStartMismatch(String),

    #[error("bad magic bytes; not a model file")]
    BadMagic,

    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),

    #[error("model file truncated")]
    Truncated,

    #[error("zero-norm query vector")]
    ZeroNormQuery,

    #[error("data has rank < 2; second principal component is undefined")]
    RankDeficient,

    #[error("models share no vocabulary")]
    EmptyIntersection,

    /// Precondition failures on arguments and small data sets.
    #[error("{0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
