use thiserror::Error;

use crate::derived::Verdict;

pub type Result<T> = std::result::Result<T, Error>;

/// Which hypothesis of a chain-rule style check failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    GNotDirectionallyDifferentiable,
    FNotLipschitz,
}

impl Hypothesis {
    pub fn as_str(&self) -> &'static str {
        match self {
            Hypothesis::GNotDirectionallyDifferentiable => "g-not-directionally-differentiable",
            Hypothesis::FNotLipschitz => "f-not-lipschitz",
        }
    }
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("map `{map}` evaluated outside its open domain at {point:?}{}", step_suffix(*.step))]
    DomainViolation {
        map: String,
        point: Vec<f64>,
        /// Step size of the difference quotient that produced the probe, if any.
        step: Option<f64>,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("unknown scenario map `{0}`")]
    UnknownScenario(String),

    #[error("catalog entry `{0}` is a single map, not an inverse pair")]
    NotAPair(String),

    #[error("direction vector has zero norm")]
    DegenerateDirection,

    #[error("basis direction {index} has a {verdict} derived set, not a one-sided derivative")]
    NotDirectionallyDifferentiable { index: usize, verdict: Verdict },

    #[error("hypothesis failure: {0}")]
    HypothesisFailure(Hypothesis),

    #[error("matrix is not symmetric positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotSpd { min_eigenvalue: f64 },

    #[error("matrix is not symmetric (asymmetry {0:e})")]
    AsymmetricInput(f64),

    #[error("fixed-point iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn step_suffix(step: Option<f64>) -> String {
    match step {
        Some(t) => format!(" (step t = {t:e})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Attaches the difference-quotient step to a domain violation.
    pub(crate) fn at_step(self, t: f64) -> Self {
        match self {
            Error::DomainViolation { map, point, .. } => Error::DomainViolation {
                map,
                point,
                step: Some(t),
            },
            other => other,
        }
    }

    /// Stable machine-readable kind, used in structured error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DomainViolation { .. } => "domain-violation",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::NonFinite(_) => "non-finite",
            Error::UnknownScenario(_) => "unknown-scenario",
            Error::NotAPair(_) => "not-a-pair",
            Error::DegenerateDirection => "degenerate-direction",
            Error::NotDirectionallyDifferentiable { .. } => "not-directionally-differentiable",
            Error::HypothesisFailure(_) => "hypothesis-failure",
            Error::NotSpd { .. } => "not-spd",
            Error::AsymmetricInput(_) => "asymmetric-input",
            Error::NoConvergence { .. } => "no-convergence",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Parse { .. } => "parse-error",
            Error::Io(_) => "io-error",
            Error::Csv(_) => "io-error",
        }
    }
}
