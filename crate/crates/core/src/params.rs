use serde::{Deserialize, Serialize};

/// A full parameter point of the controlled calibration model. The usual
/// model is the special case `sigma_delta_sq = 0`.
///
/// Variance and information formulas take a `ModelParams` so that they can
/// be evaluated either at fitted values (plug-in) or at true values
/// (theoretical columns of a simulation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub x0: f64,
    pub sigma_eps_sq: f64,
    pub sigma_delta_sq: f64,
}

impl ModelParams {
    /// Composite first-stage error variance `beta² sigma_delta² + sigma_eps²`.
    pub fn gamma(&self) -> f64 {
        self.beta * self.beta * self.sigma_delta_sq + self.sigma_eps_sq
    }

    pub fn with_sigma_delta_sq(self, sigma_delta_sq: f64) -> Self {
        Self {
            sigma_delta_sq,
            ..self
        }
    }
}
