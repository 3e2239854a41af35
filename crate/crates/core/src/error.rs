use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// A named applicability gate that refused a computation.
#[derive(Debug, Clone, PartialEq)]
pub enum GateFailure {
    /// `0 < f < 1` failed.
    SamplingFraction { f: f64 },
    /// `0 < p < 1` failed.
    Proportion { p: f64 },
    /// `6 * min(np, nq) >= 1` failed.
    MinExpectedCount { value: f64 },
    /// `|a_kn| <= delta` failed.
    StandardizedRange { a: f64, delta: f64 },
    /// `k` lies outside the support.
    Support { k: i64, lo: u64, hi: u64 },
    /// `delta_r * sigma_r > 1` failed.
    DeltaSigma { delta: f64, sigma: f64 },
}

impl GateFailure {
    /// Short machine-friendly gate name.
    pub fn name(&self) -> &'static str {
        match self {
            GateFailure::SamplingFraction { .. } => "sampling_fraction",
            GateFailure::Proportion { .. } => "proportion",
            GateFailure::MinExpectedCount { .. } => "min_expected_count",
            GateFailure::StandardizedRange { .. } => "standardized_range",
            GateFailure::Support { .. } => "support",
            GateFailure::DeltaSigma { .. } => "delta_sigma",
        }
    }
}

impl fmt::Display for GateFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateFailure::SamplingFraction { f: frac } => {
                write!(f, "sampling_fraction: need 0 < f < 1, got f = {frac}")
            }
            GateFailure::Proportion { p } => write!(f, "proportion: need 0 < p < 1, got p = {p}"),
            GateFailure::MinExpectedCount { value } => {
                write!(f, "min_expected_count: need 6*min(np, nq) >= 1, got {value}")
            }
            GateFailure::StandardizedRange { a, delta } => {
                write!(f, "standardized_range: need |a_kn| <= {delta}, got |a_kn| = {}", a.abs())
            }
            GateFailure::Support { k, lo, hi } => {
                write!(f, "support: k = {k} outside {{{lo}, ..., {hi}}}")
            }
            GateFailure::DeltaSigma { delta, sigma } => write!(
                f,
                "delta_sigma: need delta*sigma > 1, got {delta} * {sigma} = {}",
                delta * sigma
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters (n={n}, M={m}, N={pop}): {reason}")]
    InvalidParams {
        n: u64,
        m: u64,
        pop: u64,
        reason: &'static str,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("gate refused: {0}")]
    Gate(GateFailure),
    #[error("log-space error budget {budget:e} is not an order of magnitude below delta = {delta:e}")]
    ErrorBudget { delta: f64, budget: f64 },
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<GateFailure> for Error {
    fn from(g: GateFailure) -> Self {
        Error::Gate(g)
    }
}
