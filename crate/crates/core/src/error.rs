use std::path::PathBuf;

use crate::corpus::Axis;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed provision: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },

    #[error("{path}:{line}: {reason}")]
    InvalidVocabulary { path: PathBuf, line: usize, reason: String },

    #[error("provision {provision:?}: unknown {kind} token {token:?}")]
    UnknownToken {
        provision: String,
        kind: &'static str,
        token: String,
    },

    #[error("provision {provision:?}: {axis} score {value} is not an integer in -3..=3")]
    ScoreOutOfRange {
        provision: String,
        axis: Axis,
        value: String,
    },

    #[error("duplicate provision id {0:?}")]
    DuplicateId(String),

    #[error("axis pair must name two different axes, got {0} twice")]
    SameAxis(Axis),

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("corpus has no provisions")]
    EmptyCorpus,

    #[error("label class {0} has no members")]
    MissingClass(&'static str),

    #[error("every point coincides with its class centroid; abstraction index undefined")]
    DegenerateGroups,

    #[error("training labels contain a single class")]
    SingleClass,

    #[error("subgroup {subgroup} has {size} provisions, {required} required")]
    SubgroupTooSmall {
        subgroup: String,
        size: usize,
        required: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("distance matrix is not symmetric at ({0}, {1})")]
    AsymmetricInput(usize, usize),

    #[error("distance matrix has a negative entry at ({0}, {1})")]
    NegativeDistance(usize, usize),

    #[error("distance matrix has a nonzero diagonal entry at index {0}")]
    NonZeroDiagonal(usize),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
