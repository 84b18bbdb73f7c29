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

    #[error("{0}")]
    Input(String),

    #[error("{}: row {row}, column {column}: value {value:?} is not 0 or 1", path.display())]
    LabelValue {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },

    #[error("modularity undefined for zero total weight")]
    ZeroWeight,

    #[error("degenerate labels: training data needs at least {min} examples of each class (got {positives} positive, {negatives} negative)")]
    DegenerateLabels {
        min: usize,
        positives: usize,
        negatives: usize,
    },

    #[error("credibility score {0} is outside 0..=7")]
    ScoreOutOfRange(u32),

    #[error("partitions cover different node sets ({0} vs {1} nodes)")]
    PartitionMismatch(usize, usize),

    #[error("unknown measure {name:?}; valid names: {}", valid.join(", "))]
    UnknownMeasure { name: String, valid: Vec<String> },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Coarse classification used by the command-line driver to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad or missing input, configuration or usage.
    Input,
    /// An internal consistency check failed.
    Invariant,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Invariant(_) => ErrorKind::Invariant,
            _ => ErrorKind::Input,
        }
    }
}
