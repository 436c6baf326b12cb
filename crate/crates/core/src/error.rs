use std::path::PathBuf;

use thiserror::Error;

use crate::measurement::Outcome;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "coherent state with |beta| = {beta_abs} leaves tail weight {tail:.3e} outside dim {dim}; \
         use dim >= {required}"
    )]
    Truncation {
        beta_abs: f64,
        dim: usize,
        required: usize,
        tail: f64,
    },

    #[error("Fock index {k} does not fit in dimension {dim}")]
    Index { k: usize, dim: usize },

    #[error("Hilbert space dimension must be at least 2, got {0}")]
    Dimension(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state has trace {trace:.3e}, too small to renormalize")]
    DegenerateState { trace: f64 },

    #[error("outcome {outcome:?} has probability {probability:.3e}; cannot condition on it")]
    ImpossibleOutcome { outcome: Outcome, probability: f64 },

    #[error("exact enumeration over {n} atoms exceeds the cap of {cap}")]
    Size { n: usize, cap: usize },

    #[error("mean click probability {p_bar} is outside (0, 1)")]
    OutOfRange { p_bar: f64 },

    #[error("slope nu = {nu} is not positive")]
    NonpositiveNu { nu: f64 },

    #[error("sample is empty")]
    EmptySample,

    #[error(
        "no mu on the grid passes the Kolmogorov test: best mu = {mu}, statistic {statistic:.5} >= bound {bound:.5}"
    )]
    NoAcceptableMu { mu: f64, statistic: f64, bound: f64 },

    #[error("instrumental variance sigma_s = {sigma_s} is not positive (n too large for this nu)")]
    NonpositiveInstrumentVariance { sigma_s: f64 },

    #[error(
        "grid [{lo}, {hi}] needs a margin of {margin:.3} beyond the density support [{support_lo:.3}, {support_hi:.3}]"
    )]
    GridTooNarrow {
        lo: f64,
        hi: f64,
        margin: f64,
        support_lo: f64,
        support_hi: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("calibration manifest not found at {0}")]
    MissingCalibration(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
