use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point violates the domain of chart {chart}: {reason}")]
    ChartDomain { chart: String, reason: String },

    #[error("point is not in the overlap with chart {target}")]
    OutOfOverlap { target: String },

    #[error("invalid parameters: {0}")]
    BadParams(String),

    #[error("log argument vanishes: point lies on the singular hypersurface")]
    OnSingularHypersurface,

    #[error("not a fixed point: residual {residual:.3e} exceeds {tolerance:.1e}")]
    NotFixedPoint { residual: f64, tolerance: f64 },

    #[error("no admissible pencil; best minimum eigenvalue gap {best_gap:.3e}")]
    NoAdmissiblePencil { best_gap: f64 },

    #[error("eigenvalue iteration did not converge")]
    NonConvergence,

    #[error("spectrum matches no Williamson pattern: {0}")]
    UnrecognizedPattern(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("step size underflow at t = {t}")]
    StepFailure { t: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
