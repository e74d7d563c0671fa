use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    /// An input is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Operand shapes do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The Fock-space truncation cannot represent the requested state.
    #[error("truncation error: tail mass {tail:.3e} beyond dim {dim} exceeds {tol:.1e}")]
    Truncation { dim: usize, tail: f64, tol: f64 },

    /// A decomposition or iteration failed to produce a usable result.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// The null space of a generator has more than one dimension.
    #[error("ambiguous steady state: {count} eigenvalues within {tol:.1e} of zero")]
    AmbiguousSteadyState { count: usize, tol: f64 },

    /// A density matrix violates positivity beyond the repair threshold.
    #[error("invalid state: minimum eigenvalue {min_eig:.3e}")]
    InvalidState { min_eig: f64 },

    /// A root search did not converge.
    #[error("search failure after {iterations} iterations: {reason}")]
    SearchFailure { iterations: usize, reason: String },

    /// A winding contour passes through (or too close to) a triple degeneracy.
    #[error("contour passes within {norm:.3e} of a zero of the resultant vector at phi = {phi:.6}")]
    ContourThroughZero { phi: f64, norm: f64 },

    /// Winding refinement hit its sample cap without quantizing.
    #[error("winding not quantized after refinement to {samples} samples (raw = {raw})")]
    Resolution { samples: usize, raw: f64 },

    /// An explicit integrator step size collapsed.
    #[error("step size underflow at t = {t:.6e} (h = {h:.3e}); the problem is stiff, reduce dim or use the propagator path")]
    Stiff { t: f64, h: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
