use std::path::PathBuf;

use thiserror::Error;

use crate::month::Month;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing input file {0}")]
    MissingFile(PathBuf),

    #[error("malformed header in {path}: {message}")]
    MalformedHeader { path: PathBuf, message: String },

    #[error("csv error in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("duplicate key {key} in {table}")]
    DuplicateKey { table: &'static str, key: String },

    #[error("invalid configuration at `{key}`: {message}")]
    InvalidConfig { key: String, message: String },

    #[error("link interval violation for {firm}: {message}")]
    LinkInterval { firm: String, message: String },

    #[error("duplicate accounting match for {firm}: {message}")]
    DuplicateMatch { firm: String, message: String },

    #[error("overlapping availability windows for {firm}: fiscal year ending {fye} starts at {start}, previous window started at {prev_start}")]
    OverlappingWindows {
        firm: String,
        fye: chrono::NaiveDate,
        start: Month,
        prev_start: Month,
    },

    #[error("unknown sector policy `{0}`")]
    UnknownSectorPolicy(String),

    #[error("degenerate pass set for {standard}: every included observation {side}")]
    DegenerateStandard { standard: String, side: &'static str },

    #[error("empty universe for {spec} at formation month {month}")]
    EmptyUniverse { spec: String, month: Month },

    #[error("all tilt weights are zero for {spec} at formation month {month}")]
    ZeroTiltWeights { spec: String, month: Month },

    #[error("non-finite return for {firm} in {month}")]
    NonFiniteReturn { firm: String, month: Month },

    #[error("rank-deficient regressor matrix ({0})")]
    RankDeficient(String),

    #[error("insufficient observations: need at least {need}, got {got} ({context})")]
    InsufficientData {
        need: usize,
        got: usize,
        context: String,
    },

    #[error("too many skipped Fama-MacBeth months: {skipped} of {total}")]
    TooManySkippedMonths { skipped: usize, total: usize },

    #[error("empty panel: {0}")]
    EmptyPanel(String),

    #[error("invalid date range: {0}")]
    DateRange(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("missing factor data for {0}")]
    MissingFactors(Month),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            Io { .. } | MissingFile(_) => ErrorKind::Io,
            InvalidConfig { .. } | UnknownSectorPolicy(_) | UnknownScenario(_) | DateRange(_) => {
                ErrorKind::Config
            }
            DegenerateStandard { .. }
            | ZeroTiltWeights { .. }
            | NonFiniteReturn { .. }
            | RankDeficient(_)
            | TooManySkippedMonths { .. } => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            message: message.into(),
        }
    }
}
