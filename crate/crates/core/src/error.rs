use thiserror::Error;

/// Errors produced anywhere in the calibration engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibError {
    #[error("degenerate design: all first-stage x values are identical")]
    DegenerateDesign,

    #[error("too few points: need n >= 3 first-stage pairs and k >= 2 second-stage readings (got n={n}, k={k})")]
    TooFewPoints { n: usize, k: usize },

    #[error("non-finite value in {stage} at index {index}")]
    NonFinite { stage: &'static str, index: usize },

    #[error("estimated slope {beta} is too close to zero; X0 is not identifiable")]
    ZeroSlope { beta: f64 },

    #[error("information matrix is singular to working precision (condition estimate {condition:e})")]
    SingularInformation { condition: f64 },

    #[error("solver did not converge after {iterations} iterations (scaled residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("solver reached a non-positive error variance ({sigma_eps_sq:e})")]
    NonPositiveVariance { sigma_eps_sq: f64 },

    #[error("variance {0:e} is not strictly positive; no interval can be formed")]
    DegenerateVariance(f64),

    #[error("confidence level / probability {0} is outside (0, 1)")]
    InvalidLevel(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("every replication failed for estimator {estimator}")]
    AllReplicationsFailed { estimator: &'static str },
}

impl CalibError {
    /// True for failures of the numerical machinery rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            CalibError::ZeroSlope { .. }
                | CalibError::SingularInformation { .. }
                | CalibError::NoConvergence { .. }
                | CalibError::NonPositiveVariance { .. }
                | CalibError::DegenerateVariance(_)
                | CalibError::AllReplicationsFailed { .. }
        )
    }
}

pub type Result<T, E = CalibError> = std::result::Result<T, E>;
