use thiserror::Error;

/// Errors raised by model construction and the numerical drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("zero mode makes ε and |D_0| ill-conditioned (m = 0 requires an antiperiodic grid)")]
    ZeroMode,

    #[error("potential modes truncated: |k| = {k} exceeds 2·N_max = {limit} (aliasing)")]
    Aliasing { k: i64, limit: i64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitean (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("outside local section domain: smallest singular value of a is {sigma_min:.3e}")]
    OutsideSection { sigma_min: f64 },

    #[error("left local-section domain at t={t}: smallest singular value of a is {sigma_min:.3e}")]
    LeftSectionDomain { t: f64, sigma_min: f64 },

    #[error(
        "stiff potential: raise steps or lower λ (no convergence after {halvings} halvings, last change {change:.3e})"
    )]
    EvolutionNotConverged { halvings: usize, change: f64 },

    #[error("quadrature refinement failed after {doublings} doublings (last relative change {change:.3e})")]
    QuadratureNotConverged { doublings: usize, change: f64 },

    #[error("Richardson extrapolation did not converge (last difference {change:.3e})")]
    ExtrapolationNotConverged { change: f64 },

    #[error("insufficient polyhomogeneous depth: {0}")]
    InsufficientDepth(String),

    #[error("path is missing data: {0}")]
    InvalidPath(String),

    #[error("{}", match line { Some(l) => format!("config line {l}: {message}"), None => format!("config: {message}") })]
    Config { line: Option<usize>, message: String },

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl LabError {
    pub fn config(message: impl Into<String>) -> Self {
        LabError::Config { line: None, message: message.into() }
    }

    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            LabError::OutsideSection { .. }
                | LabError::LeftSectionDomain { .. }
                | LabError::EvolutionNotConverged { .. }
                | LabError::QuadratureNotConverged { .. }
                | LabError::ExtrapolationNotConverged { .. }
                | LabError::InvalidPath(_)
        )
    }

    /// Process exit code: 3 for numerical aborts, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        if self.is_numerical() {
            3
        } else {
            2
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
