//! Error type shared by every module of the crate.

use thiserror::Error;

/// Broad classification used by front ends to pick exit codes and HTTP statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad or inconsistent input data (files, series, panels).
    Data,
    /// Caller supplied parameters outside the operation's domain.
    InvalidInput,
    /// The problem is well formed but has no feasible solution.
    Infeasible,
    /// A numerical routine failed to converge or factorize.
    Solver,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("market-data: cannot read {source_name}: {reason}")]
    Io { source_name: String, reason: String },

    #[error("{context}: line {line}: {reason}")]
    Parse {
        context: &'static str,
        line: usize,
        reason: String,
    },

    #[error("market-data: non-positive price {price} for {ticker} at row {row}")]
    NonPositivePrice { ticker: String, row: usize, price: f64 },

    #[error("{context}: missing required column '{column}'")]
    MissingColumn { context: &'static str, column: String },

    #[error("{context}: insufficient data: need at least {need} {what}, got {got}")]
    InsufficientData {
        context: &'static str,
        what: &'static str,
        need: usize,
        got: usize,
    },

    #[error("{context}: {reason}")]
    InvalidInput { context: &'static str, reason: String },

    #[error("optimizer: invalid bounds for asset {asset}: {reason}")]
    InvalidBounds { asset: String, reason: String },

    #[error("optimizer: infeasible problem: {0}")]
    Infeasible(String),

    #[error("optimizer: target return {target} outside feasible interval [{min}, {max}]")]
    TargetOutOfRange { target: f64, min: f64, max: f64 },

    #[error("optimizer: no feasible portfolio earns more than the risk-free rate {risk_free} (max feasible return {max_return})")]
    NoPositiveExcess { max_return: f64, risk_free: f64 },

    #[error("{context}: covariance matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue}, largest {max_eigenvalue})")]
    NotPositiveSemidefinite {
        context: &'static str,
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("optimizer: active-set solver exceeded {iterations} iterations")]
    IterationLimit { iterations: usize },

    #[error("{context}: numerical failure: {reason}")]
    Numerical { context: &'static str, reason: String },

    #[error("montecarlo: no sample satisfied the bounds ({n_samples} drawn, rejection rate {rejection_rate:.4}); draw more samples or loosen the bounds")]
    NoAcceptedSamples { n_samples: u64, rejection_rate: f64 },

    #[error("factors: design matrix is rank deficient; collinear columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("{context}: zero variance in '{name}'")]
    ZeroVariance { context: &'static str, name: String },

    #[error("blacklitterman: tau * sigma is numerically singular (smallest eigenvalue {smallest_eigenvalue})")]
    SingularPrior { smallest_eigenvalue: f64 },

    #[error("{context}: unknown asset '{asset}'")]
    UnknownAsset { context: &'static str, asset: String },

    #[error("blacklitterman: duplicate view '{0}'")]
    DuplicateView(String),
}

impl Error {
    pub(crate) fn invalid(context: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            context,
            reason: reason.into(),
        }
    }

    pub(crate) fn numerical(context: &'static str, reason: impl Into<String>) -> Self {
        Error::Numerical {
            context,
            reason: reason.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::NonPositivePrice { .. }
            | Error::MissingColumn { .. }
            | Error::InsufficientData { .. }
            | Error::RankDeficient { .. }
            | Error::ZeroVariance { .. } => ErrorCategory::Data,
            Error::InvalidInput { .. }
            | Error::InvalidBounds { .. }
            | Error::UnknownAsset { .. }
            | Error::DuplicateView(_) => ErrorCategory::InvalidInput,
            Error::Infeasible(_)
            | Error::TargetOutOfRange { .. }
            | Error::NoPositiveExcess { .. }
            | Error::NoAcceptedSamples { .. } => ErrorCategory::Infeasible,
            Error::NotPositiveSemidefinite { .. }
            | Error::IterationLimit { .. }
            | Error::Numerical { .. }
            | Error::SingularPrior { .. } => ErrorCategory::Solver,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
