use thiserror::Error;

/// Broad class of a failure, used by front ends to pick exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input or configuration.
    Input,
    /// The data left the small-data regime (bound state, slope condition).
    Regime,
    /// A numerical method did not converge or ran out of resolution.
    Numerical,
}

#[derive(Debug, Error)]
pub enum WkiError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resolution exceeded at lambda = {lambda}: {substeps} substeps needed, cap is {cap}")]
    ResolutionExceeded {
        lambda: f64,
        substeps: usize,
        cap: usize,
    },

    #[error(
        "possible bound state: min |a| = {min_abs_a:.3e} (floor {floor}), winding of a = {winding}"
    )]
    PossibleBoundState {
        min_abs_a: f64,
        floor: f64,
        winding: i64,
    },

    #[error("Riemann-Hilbert solve failed: {0}")]
    RhpUnsolved(String),

    #[error("slope condition violated: |s| = {slope} with margin {margin}")]
    SlopeConditionViolated { slope: f64, margin: f64 },

    #[error("hodograph fixed point did not converge after {iterations} iterations (last change {change:.3e})")]
    HodographUnsolved { iterations: usize, change: f64 },

    #[error("hodograph map inconsistent: {0}")]
    HodographInconsistent(String),

    #[error("range error: {0}")]
    RangeError(String),

    #[error("diagnostic unreliable: {0}")]
    DiagnosticUnreliable(String),

    #[error("evolution diverged at t = {time}, x = {x}: |q| = {value:.3e}")]
    EvolutionDiverged { time: f64, x: f64, value: f64 },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("at x_H = {x_h}, t = {t}: {source}")]
    InCell {
        x_h: f64,
        t: f64,
        #[source]
        source: Box<WkiError>,
    },
}

impl WkiError {
    pub fn class(&self) -> ErrorClass {
        match self {
            WkiError::InvalidArgument(_) => ErrorClass::Input,
            WkiError::PossibleBoundState { .. }
            | WkiError::SlopeConditionViolated { .. }
            | WkiError::EvolutionDiverged { .. } => ErrorClass::Regime,
            WkiError::InCell { source, .. } => source.class(),
            _ => ErrorClass::Numerical,
        }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            WkiError::InvalidArgument(_) => "invalid-argument",
            WkiError::ResolutionExceeded { .. } => "resolution-exceeded",
            WkiError::PossibleBoundState { .. } => "possible-bound-state",
            WkiError::RhpUnsolved(_) => "rhp-unsolved",
            WkiError::SlopeConditionViolated { .. } => "slope-condition-violated",
            WkiError::HodographUnsolved { .. } => "hodograph-unsolved",
            WkiError::HodographInconsistent(_) => "hodograph-inconsistent",
            WkiError::RangeError(_) => "range-error",
            WkiError::DiagnosticUnreliable(_) => "diagnostic-unreliable",
            WkiError::EvolutionDiverged { .. } => "evolution-diverged",
            WkiError::Internal(_) => "internal-error",
            WkiError::InCell { source, .. } => source.kind(),
        }
    }

    pub(crate) fn in_cell(self, x_h: f64, t: f64) -> WkiError {
        match self {
            e @ WkiError::InCell { .. } => e,
            e => WkiError::InCell {
                x_h,
                t,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, WkiError>;
