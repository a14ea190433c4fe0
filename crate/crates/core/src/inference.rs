//! Information matrices, variance and bias approximations for the inverse
//! estimator, and Wald intervals.
//!
//! Every formula takes a [`ModelParams`] and a [`Design`]; callers decide
//! whether the parameters are fitted values or true values.

use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::numerics::{two_sided_z, Matrix};
use crate::params::ModelParams;
use crate::stats::Design;
use crate::usual::{bias_usual, variance_v1_usual, variance_v2_usual};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VarianceFormula {
    /// Usual model, `n` and `k` large.
    V1Usual,
    /// Usual model, `k` fixed.
    V2Usual,
    /// Controlled model with unknown `sigma_delta²`, `n` and `k` large.
    V1Controlled,
    /// Controlled model with unknown `sigma_delta²`, `k` fixed.
    V2Controlled,
    /// Controlled model with known `sigma_delta²` (information inverse).
    VKnownDelta,
}

impl VarianceFormula {
    pub const ALL: [VarianceFormula; 5] = [
        VarianceFormula::V1Usual,
        VarianceFormula::V2Usual,
        VarianceFormula::V1Controlled,
        VarianceFormula::V2Controlled,
        VarianceFormula::VKnownDelta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VarianceFormula::V1Usual => "v1_usual",
            VarianceFormula::V2Usual => "v2_usual",
            VarianceFormula::V1Controlled => "v1_controlled",
            VarianceFormula::V2Controlled => "v2_controlled",
            VarianceFormula::VKnownDelta => "v_known_delta",
        }
    }

    pub fn variance(self, params: &ModelParams, design: &Design) -> Result<f64> {
        match self {
            VarianceFormula::V1Usual => variance_v1_usual(params, design),
            VarianceFormula::V2Usual => variance_v2_usual(params, design),
            VarianceFormula::V1Controlled => variance_v1_controlled(params, design),
            VarianceFormula::V2Controlled => variance_v2_controlled(params, design),
            VarianceFormula::VKnownDelta => variance_known_delta(params, design),
        }
    }

    /// Second-order bias paired with the formula; zero where none is defined.
    pub fn bias(self, params: &ModelParams, design: &Design) -> Result<f64> {
        match self {
            VarianceFormula::V1Usual | VarianceFormula::V2Usual => bias_usual(params, design),
            VarianceFormula::V1Controlled | VarianceFormula::V2Controlled => bias_controlled(params, design),
            VarianceFormula::VKnownDelta => Ok(0.0),
        }
    }
}

fn require_slope(params: &ModelParams) -> Result<()> {
    if params.beta == 0.0 || !params.beta.is_finite() {
        return Err(CalibError::ZeroSlope { beta: params.beta });
    }
    Ok(())
}

fn require_positive_variances(params: &ModelParams) -> Result<f64> {
    let gamma = params.gamma();
    if !(params.sigma_eps_sq > 0.0 && gamma > 0.0 && gamma.is_finite()) {
        return Err(CalibError::SingularInformation {
            condition: f64::INFINITY,
        });
    }
    Ok(gamma)
}

/// Fisher information of `(alpha, beta, x0, sigma_delta², sigma_eps²)` for
/// the controlled model with `sigma_delta²` unknown.
pub fn fisher_controlled_unknown(params: &ModelParams, design: &Design) -> Result<Matrix> {
    let g = require_positive_variances(params)?;
    let s = params.sigma_eps_sq;
    let d = params.sigma_delta_sq;
    let (b, x0) = (params.beta, params.x0);
    let n = design.n as f64;
    let k = design.k as f64;
    let g2 = g * g;

    let aa = n / g + k / s;
    let ab = n * design.x_bar / g + k * x0 / s;
    let bb = design.sum_x_sq / g + 2.0 * n * b * b * d * d / g2 + k * x0 * x0 / s;
    let b_delta = n * b * b * b * d / g2;
    let b_eps = n * b * d / g2;
    let delta_delta = n * b.powi(4) / (2.0 * g2);
    let delta_eps = n * b * b / (2.0 * g2);
    let eps_eps = n / (2.0 * g2) + k / (2.0 * s * s);

    Ok(Matrix::from_rows(&[
        [aa, ab, k * b / s, 0.0, 0.0],
        [ab, bb, k * b * x0 / s, b_delta, b_eps],
        [k * b / s, k * b * x0 / s, k * b * b / s, 0.0, 0.0],
        [0.0, b_delta, 0.0, delta_delta, delta_eps],
        [0.0, b_eps, 0.0, delta_eps, eps_eps],
    ]))
}

/// Fisher information of `(alpha, beta, x0, sigma_eps²)` for the controlled
/// model with `sigma_delta²` known.
pub fn fisher_controlled_known(params: &ModelParams, design: &Design) -> Result<Matrix> {
    let g = require_positive_variances(params)?;
    let s = params.sigma_eps_sq;
    let d = params.sigma_delta_sq;
    let (b, x0) = (params.beta, params.x0);
    let n = design.n as f64;
    let k = design.k as f64;
    let g2 = g * g;

    let aa = n / g + k / s;
    let ab = n * design.x_bar / g + k * x0 / s;
    let bb = design.sum_x_sq / g + 2.0 * n * b * b * d * d / g2 + k * x0 * x0 / s;
    let b_eps = n * b * d / g2;
    let eps_eps = n / (2.0 * g2) + k / (2.0 * s * s);

    Ok(Matrix::from_rows(&[
        [aa, ab, k * b / s, 0.0],
        [ab, bb, k * b * x0 / s, b_eps],
        [k * b / s, k * b * x0 / s, k * b * b / s, 0.0],
        [0.0, b_eps, 0.0, eps_eps],
    ]))
}

/// Variance of the inverse estimator to order `1/n` under the controlled
/// model (`k` proportional to `n`):
/// `(1/beta²) [s/k + g/n + g (x̄ - x0)² / (n S_xx)]`.
pub fn variance_v1_controlled(params: &ModelParams, design: &Design) -> Result<f64> {
    require_slope(params)?;
    let n = design.n as f64;
    let k = design.k as f64;
    let g = params.gamma();
    let d = design.x_bar - params.x0;
    let b2 = params.beta * params.beta;
    Ok((params.sigma_eps_sq / k + g / n + g * d * d / (n * design.s_xx)) / b2)
}

/// Second-order bias of the inverse estimator under the controlled model,
/// `gamma (x0 - x̄) / (n beta² S_xx)`.
///
/// The estimate is pulled towards the design centroid: expanding `1/b̂`
/// around `beta` gives `E[1/b̂] ≈ (1 + Var(b̂)/beta²)/beta`, which multiplies
/// the signed distance `x0 - x̄`.
pub fn bias_controlled(params: &ModelParams, design: &Design) -> Result<f64> {
    require_slope(params)?;
    let n = design.n as f64;
    Ok(params.gamma() * (params.x0 - design.x_bar) / (n * params.beta * params.beta * design.s_xx))
}

/// Variance with `k` held fixed: [`variance_v1_controlled`] plus
/// `3 gamma sigma_eps² / (n k beta⁴ S_xx)`.
pub fn variance_v2_controlled(params: &ModelParams, design: &Design) -> Result<f64> {
    let v1 = variance_v1_controlled(params, design)?;
    let n = design.n as f64;
    let k = design.k as f64;
    let b2 = params.beta * params.beta;
    Ok(v1 + 3.0 * params.gamma() * params.sigma_eps_sq / (n * k * b2 * b2 * design.s_xx))
}

/// Large-sample variance of the inverse estimator when `sigma_delta²` is
/// known: the `(x0, x0)` entry of the inverse of
/// [`fisher_controlled_known`], in closed form.
pub fn variance_known_delta(params: &ModelParams, design: &Design) -> Result<f64> {
    require_slope(params)?;
    let n = design.n as f64;
    let k = design.k as f64;
    let s = params.sigma_eps_sq;
    let d = params.sigma_delta_sq;
    let b = params.beta;
    let g = params.gamma();
    let (x0, xb) = (params.x0, design.x_bar);
    let s2 = s * s;
    let g2 = g * g;

    let numerator = (n * s2 + k * g2) * (x0 - xb) * (x0 - xb);
    let denominator = (n * s2 + k * g2) * design.sum_x_sq + 2.0 * n * k * b * b * g * d * d
        - n * n * xb * xb * s2
        - n * k * xb * xb * g2;
    if !(denominator > 0.0) {
        return Err(CalibError::SingularInformation {
            condition: f64::INFINITY,
        });
    }
    let e = numerator / denominator;
    Ok((s / k + g / n + g * e) / (b * b))
}

/// Wald interval `x0_hat ± z sqrt(variance)` at the given two-sided level.
pub fn confidence_interval(x0_hat: f64, variance: f64, level: f64) -> Result<(f64, f64)> {
    let z = two_sided_z(level)?;
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(CalibError::DegenerateVariance(variance));
    }
    let half = z * variance.sqrt();
    Ok((x0_hat - half, x0_hat + half))
}

/// Uncertainty summary for one point estimate under one variance formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub variance_formula: VarianceFormula,
    pub variance: f64,
    pub bias: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub confidence_level: f64,
}

impl UncertaintyReport {
    /// Evaluates `formula` at `params` and builds the interval around
    /// `params.x0`.
    pub fn new(formula: VarianceFormula, params: &ModelParams, design: &Design, level: f64) -> Result<Self> {
        let variance = formula.variance(params, design)?;
        let bias = formula.bias(params, design)?;
        let (ci_lower, ci_upper) = confidence_interval(params.x0, variance, level)?;
        Ok(Self {
            variance_formula: formula,
            variance,
            bias,
            ci_lower,
            ci_upper,
            confidence_level: level,
        })
    }

    /// Full interval width, `2 z sqrt(variance)`.
    pub fn amplitude(&self) -> f64 {
        self.ci_upper - self.ci_lower
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.amplitude()
    }
}
