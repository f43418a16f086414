use thiserror::Error;

/// Errors raised by the engine.
///
/// Variants split into two families: usage errors (bad input, caught before
/// any computation) and computation diagnostics (the inputs were well formed
/// but a numerical step failed). [`Error::is_usage`] tells them apart.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid representing function: {0}")]
    InvalidRepFn(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("function is undefined at stencil point {point:?}")]
    NanAtStencil { point: Vec<f64> },

    #[error("integrand is undefined (NaN) at {point:?}")]
    NanIntegrand { point: Vec<f64> },

    #[error("quadrature did not converge: relative change {rel_change:.3e} at {nodes} nodes")]
    QuadratureNotConverged { nodes: usize, rel_change: f64 },

    #[error("no interior optimum in [{lo}, {hi}]; widen the bracket")]
    NoInteriorOptimum { lo: f64, hi: f64 },

    #[error("degenerate measure change: normalizer E[1+eta] = {normalizer}")]
    DegenerateMeasureChange { normalizer: f64 },

    #[error("negative density weight {weight} (eta >= -1 violated)")]
    NegativeWeight { weight: f64 },

    #[error("{bad} of {total} simulated paths were non-finite")]
    TooManyNonFinite { bad: usize, total: usize },

    #[error("contour integral tail {tail:.3e} exceeds tolerance at u_max = {u_max}")]
    ContourTail { tail: f64, u_max: f64 },

    #[error("result has non-negligible imaginary part {imag:.3e}")]
    NotReal { imag: f64 },
}

impl Error {
    /// True for errors caused by malformed input rather than numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::InvalidRepFn(_)
                | Error::InvalidModel(_)
                | Error::Usage(_)
                | Error::Parse { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
