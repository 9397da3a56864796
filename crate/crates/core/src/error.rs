use std::path::PathBuf;

use thiserror::Error;

use crate::detector::ThresholdPair;

pub type Result<T> = std::result::Result<T, Error>;

/// Problems found while reading a trace file. Line numbers are 1-based and
/// count the header.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("trace file is empty")]
    EmptyFile,
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: expected {expected} scores, found {found}")]
    InconsistentBlocks {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: score {value} outside (0,1)")]
    ScoreOutOfRange { line: usize, value: f64 },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("degenerate population: {0}")]
    DegeneratePopulation(String),

    #[error("channel cannot support offloading: snr {snr} below floor {floor}")]
    InfeasibleChannel { snr: f64, floor: f64 },

    #[error("energy budget {energy_limit} J does not cover block-1 processing ({block1_energy} J)")]
    InfeasibleBudget { energy_limit: f64, block1_energy: f64 },

    #[error("proximal weight {lambda} too small, strong convexity needs lambda > {min_lambda}")]
    LambdaTooSmall { lambda: f64, min_lambda: f64 },

    #[error("numerical failure: {reason}")]
    NumericalFailure {
        reason: String,
        history: Vec<ThresholdPair>,
    },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier, used in machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Parse(_) => "parse",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::DegeneratePopulation(_) => "degenerate_population",
            Error::InfeasibleChannel { .. } => "infeasible_channel",
            Error::InfeasibleBudget { .. } => "infeasible_budget",
            Error::LambdaTooSmall { .. } => "lambda_too_small",
            Error::NumericalFailure { .. } => "numerical_failure",
            Error::Config(_) => "config",
        }
    }
}
