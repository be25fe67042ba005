use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: clicks ({clicks}) exceed impressions ({impressions})")]
    ClicksExceedImpressions {
        line: usize,
        clicks: u64,
        impressions: u64,
    },

    #[error("input contains no records")]
    Empty,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("bias feature dimension mismatch: expected {expected}, found {found} (bias `{bias}`)")]
    DimensionMismatch {
        bias: String,
        expected: usize,
        found: usize,
    },

    #[error("missing bias features for `{0}`")]
    MissingBiasFeature(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("unknown bias factor `{0}`")]
    UnknownBias(String),

    #[error("missing guess value for {kind} `{id}`")]
    MissingGuess { kind: &'static str, id: String },

    #[error("{0} must be strictly positive, got {1}")]
    NonPositive(&'static str, f64),

    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("sequences have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("sequence has zero variance")]
    ZeroVariance,

    #[error("merged id `{0}` collides with an existing bias factor")]
    RelabelCollision(String),

    #[error("cannot build {requested} components with list size {list_size}")]
    InfeasibleComponents { requested: usize, list_size: usize },

    #[error("generated dataset has {found} components after {attempts} attempts, expected {expected}")]
    ComponentMismatch {
        expected: usize,
        found: usize,
        attempts: usize,
    },

    #[error("unknown context id {0}")]
    UnknownContext(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
