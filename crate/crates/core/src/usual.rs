//! The usual linear calibration model: first-stage regressors are known
//! exactly and both stages share one error variance.

use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::numerics::Matrix;
use crate::params::ModelParams;
use crate::stats::{Design, SufficientStats};

/// Maximum-likelihood estimates of the usual model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsualFit {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub x0_hat: f64,
    pub sigma_eps_sq_hat: f64,
}

impl UsualFit {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            alpha: self.alpha_hat,
            beta: self.beta_hat,
            x0: self.x0_hat,
            sigma_eps_sq: self.sigma_eps_sq_hat,
            sigma_delta_sq: 0.0,
        }
    }
}

/// Rejects slopes too small for the calibration curve to be inverted.
pub(crate) fn check_slope(beta: f64, y0_bar: f64, alpha: f64) -> Result<()> {
    let threshold = 1e-12 * 1f64.max((y0_bar - alpha).abs());
    if !beta.is_finite() || beta.abs() < threshold {
        return Err(CalibError::ZeroSlope { beta });
    }
    Ok(())
}

fn require_slope(params: &ModelParams) -> Result<()> {
    if params.beta == 0.0 || !params.beta.is_finite() {
        return Err(CalibError::ZeroSlope { beta: params.beta });
    }
    Ok(())
}

pub fn fit_usual(stats: &SufficientStats) -> Result<UsualFit> {
    let beta_hat = stats.s_xy / stats.s_xx;
    let alpha_hat = stats.y_bar - beta_hat * stats.x_bar;
    check_slope(beta_hat, stats.y0_bar, alpha_hat)?;
    let x0_hat = (stats.y0_bar - alpha_hat) / beta_hat;

    // Pooled residual variance over both stages, divisor n + k.
    let n = stats.n as f64;
    let k = stats.k as f64;
    let first_stage_rss = n * stats.residual_mean_square(beta_hat);
    let sigma_eps_sq_hat = (first_stage_rss + k * stats.s_y0y0) / (n + k);

    Ok(UsualFit {
        alpha_hat,
        beta_hat,
        x0_hat,
        sigma_eps_sq_hat,
    })
}

/// Fisher information of `(alpha, beta, x0, sigma_eps²)` for the usual model.
pub fn fisher_usual(params: &ModelParams, design: &Design) -> Result<Matrix> {
    let s2 = params.sigma_eps_sq;
    if !(s2 > 0.0 && s2.is_finite()) {
        return Err(CalibError::SingularInformation {
            condition: f64::INFINITY,
        });
    }
    let n = design.n as f64;
    let k = design.k as f64;
    let (b, x0) = (params.beta, params.x0);

    let a12 = k * x0 + n * design.x_bar;
    let mut m = Matrix::from_rows(&[
        [n + k, a12, k * b, 0.0],
        [a12, k * x0 * x0 + design.sum_x_sq, k * b * x0, 0.0],
        [k * b, k * b * x0, k * b * b, 0.0],
        [0.0, 0.0, 0.0, (n + k) / (2.0 * s2)],
    ]);
    for i in 0..4 {
        for j in 0..4 {
            m[(i, j)] /= s2;
        }
    }
    Ok(m)
}

/// First-order variance of the inverse estimator when `n` and `k` grow
/// together.
pub fn variance_v1_usual(params: &ModelParams, design: &Design) -> Result<f64> {
    require_slope(params)?;
    let n = design.n as f64;
    let k = design.k as f64;
    let d = design.x_bar - params.x0;
    Ok(params.sigma_eps_sq / (params.beta * params.beta) * (1.0 / k + 1.0 / n + d * d / (n * design.s_xx)))
}

/// Second-order bias of the inverse estimator with `k` held fixed.
pub fn bias_usual(params: &ModelParams, design: &Design) -> Result<f64> {
    require_slope(params)?;
    let n = design.n as f64;
    Ok(params.sigma_eps_sq * (params.x0 - design.x_bar) / (n * params.beta * params.beta * design.s_xx))
}

/// Variance with `k` held fixed: the first-order variance plus
/// `3 sigma⁴ / (n k beta⁴ S_xx)`.
pub fn variance_v2_usual(params: &ModelParams, design: &Design) -> Result<f64> {
    let v1 = variance_v1_usual(params, design)?;
    let n = design.n as f64;
    let k = design.k as f64;
    let s2 = params.sigma_eps_sq;
    let b2 = params.beta * params.beta;
    Ok(v1 + 3.0 * s2 * s2 / (n * k * b2 * b2 * design.s_xx))
}
