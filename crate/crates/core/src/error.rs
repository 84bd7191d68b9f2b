use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid construction label {label:?}: {reason}")]
    InvalidLabel { label: String, reason: String },

    /// Malformed input with its source location. `line` is 1-based.
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("duplicate construction label {0:?}")]
    DuplicateLabel(String),

    #[error("unknown construction label {0:?}")]
    UnknownLabel(String),

    #[error("construction id {id} out of range for an inventory of {size}")]
    UnknownConstruction { id: usize, size: usize },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty match universe")]
    EmptyUniverse,

    #[error("universe of {size} matches exceeds the exhaustive-search limit of {limit}")]
    UniverseTooLarge { size: usize, limit: usize },

    #[error("word index {0} is missing from the subword alignment")]
    MissingAlignment(usize),

    #[error("invalid subword alignment: {0}")]
    InvalidAlignment(String),

    #[error("span [{start}, {end}) is out of range for {len} tokens")]
    SpanOutOfRange { start: usize, end: usize, len: usize },

    #[error("node {index} is out of range for {len} nodes")]
    NodeOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },

    #[error("embedding row {0} has zero norm")]
    ZeroNorm(usize),

    #[error("inventory of {size} constructions is too small for k = {k}")]
    InventoryTooSmall { size: usize, k: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by malformed input files.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::InvalidLabel { .. }
                | Error::DuplicateLabel(_)
                | Error::UnknownLabel(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
