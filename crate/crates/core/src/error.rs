use thiserror::Error;

use crate::coding::SparseCode;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid dictionary: {0}")]
    InvalidDictionary(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Carries the last coordinate-descent iterate so callers can still use it.
    #[error("lasso did not converge within {sweeps} sweeps (last max change {last_change:e})")]
    ConvergenceFailure {
        sweeps: usize,
        last_change: f64,
        last: Box<SparseCode>,
    },

    #[error("restricted residual has no energy (Frobenius norm {norm:e})")]
    EmptyEnergy { norm: f64 },

    #[error("no connected topology found after {attempts} attempts (N = {sites}, p = {p})")]
    TopologyGeneration {
        attempts: usize,
        sites: usize,
        p: f64,
    },

    #[error("consensus correction underflow at site {site}: [W^T 1]_i = {value:e}")]
    CorrectionUnderflow { site: usize, value: f64 },

    #[error("mixing time exceeds the cap of {cap} steps")]
    MixingTimeOverflow { cap: usize },

    #[error("power iteration collapsed at site {site} (norm {norm:e})")]
    PowerCollapse { site: usize, norm: f64 },

    #[error("insufficient trace: {0}")]
    InsufficientTrace(String),

    /// Offending (iteration, atom) pairs, 1-based.
    #[error("no spectral gap (lambda2/lambda1 >= 1) at {0:?}")]
    GapViolation(Vec<(usize, usize)>),

    #[error("IDX format error: {0}")]
    Format(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
