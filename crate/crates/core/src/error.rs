use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while reading topologies, traffic matrices, path caches and configs.
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("malformed {format} document: {message}")]
    Malformed { format: &'static str, message: String },
    #[error("duplicate node label `{0}`")]
    DuplicateNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("{element}: non-positive capacity {capacity}")]
    NonPositiveCapacity { element: String, capacity: f64 },
    #[error("{element}: missing capacity attribute `{attr}`")]
    MissingCapacity { element: String, attr: String },
    #[error("{element}: self-loop on node `{node}`")]
    SelfLoop { element: String, node: String },
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
    #[error("dimension mismatch: step {step} has {found} nodes, expected {expected}")]
    Dimension { step: usize, found: usize, expected: usize },
}

#[derive(Debug, Error)]
pub enum TmError {
    #[error("total volume must be non-negative, got {0}")]
    NegativeVolume(f64),
    #[error("all node weights are zero; gravity model undefined")]
    ZeroWeights,
    #[error("topology has fewer than two nodes")]
    TooSmall,
    #[error("invalid sequence parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Error)]
pub enum AllocationError {
    #[error("solution status is {0:?}, not optimal")]
    NotOptimal(crate::lp::LpStatus),
    #[error("demand {src}->{dst}: residual {residual:e} exceeds tolerance")]
    Residual { src: usize, dst: usize, residual: f64 },
    #[error("demand {src}->{dst}: flow on unknown path index {index}")]
    UnknownPath { src: usize, dst: usize, index: usize },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("missing topology: set `topology.path` or `topology.random`")]
    MissingTopology,
    #[error("unknown system `{0}` (expected one of KSP+LB, KSP+AD, RACKE+LB, RACKE+AD, OPTIMAL(LB), OPTIMAL(AD))")]
    UnknownSystem(String),
    #[error("conflicting demand sources: `demand.tm_file` and generator keys are both set")]
    ConflictingDemand,
    #[error("`{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("`{key}`: file {path} does not exist")]
    MissingFile { key: String, path: PathBuf },
}

/// Top-level error for experiment orchestration.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Tm(#[from] TmError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Other(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
