use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no inverse: zero is not invertible")]
    NoInverse,

    #[error("field too small: k + r = {0} exceeds 256")]
    FieldTooSmall(usize),

    #[error("invalid code parameters: {0}")]
    InvalidParams(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("too many erasures: need {needed} symbols, have {available}")]
    TooManyErasures { needed: usize, available: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("too many groups: t = {t} but at most r - 1 = {max} are allowed")]
    TooManyGroups { t: usize, max: usize },

    #[error("formula regime violated: t = {t} does not divide k = {k}")]
    FormulaRegime { k: usize, t: usize },

    #[error("use heuristic: k = {k}, r = {r} is beyond the enumeration bound (k <= 14, r <= 7)")]
    UseHeuristic { k: usize, r: usize },

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("repair degraded: {0}")]
    RepairDegraded(#[from] FetchError),

    #[error("use reassemble: {0} nodes are missing, single-node repair needs exactly one")]
    UseReassemble(usize),

    #[error("unrecoverable: only {available} of the {needed} required nodes are intact")]
    Unrecoverable { needed: usize, available: usize },

    #[error("invariant mismatch: {0}")]
    InvariantMismatch(String),

    #[error("manifest {path}: {msg}")]
    Manifest { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

/// Failure to read one cell from a node.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot fetch node {node} column {column}: {reason}")]
pub struct FetchError {
    pub node: usize,
    pub column: usize,
    pub reason: String,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
