use thiserror::Error;

use crate::state::HierarchyLevel;

pub type Result<T, E = RodError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RodError {
    #[error("state is at level {found} but level {required} was requested")]
    LevelMismatch {
        required: HierarchyLevel,
        found: HierarchyLevel,
    },

    #[error("expected {expected} state components, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid stiffness parameters: {0}")]
    InvalidParams(String),

    #[error("operation requires a transversely isotropic rod (K1 = K2)")]
    NotIsotropic,

    #[error("force and field are aligned (|n x B| = {defect:e}); canonical chart undefined")]
    AlignedState { defect: f64 },

    #[error("Euler-angle chart is singular (|sin theta| = {sin_theta:e})")]
    GimbalSingular { sin_theta: f64 },

    #[error("negative radicand under v_perp: {value:e}")]
    NegativeRadicand { value: f64 },

    #[error("magnetic Casimir C3 = {c3:e} must be strictly positive")]
    DegenerateField { c3: f64 },

    #[error("tolerance {tol:e} outside [1e-13, 1e-3]")]
    InvalidTolerance { tol: f64 },

    #[error("integration span [{start}, {end}] is not finite")]
    InvalidSpan { start: f64, end: f64 },

    #[error("step size underflow at s = {s} (h = {h:e})")]
    StepSizeUnderflow { s: f64, h: f64 },

    #[error("non-finite value in component {component} at s = {s}")]
    NonFinite { s: f64, component: usize },

    #[error("step budget of {max_steps} exhausted at s = {s}")]
    TooManySteps { s: f64, max_steps: usize },

    #[error("no seed found on the level set after {attempts} attempts")]
    NoSeedFound { attempts: usize },

    #[error("invalid section: {0}")]
    InvalidSection(String),
}

impl RodError {
    /// Failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            RodError::StepSizeUnderflow { .. }
                | RodError::NonFinite { .. }
                | RodError::TooManySteps { .. }
                | RodError::NegativeRadicand { .. }
                | RodError::GimbalSingular { .. }
                | RodError::AlignedState { .. }
                | RodError::NoSeedFound { .. }
        )
    }
}
