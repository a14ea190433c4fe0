//! The homoscedastic controlled calibration model.
//!
//! First-stage regressors are set by the experimenter, but the realized
//! value differs from the nominal one by a normal error of variance
//! `sigma_delta²`. The first-stage error becomes `eps - beta * delta` with
//! variance `gamma = beta² sigma_delta² + sigma_eps²`; the second stage keeps
//! variance `sigma_eps²`.

use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::numerics::{solve_newton_2d, FailureKind, NonlinearSystem2, SolverConfig};
use crate::params::ModelParams;
use crate::stats::SufficientStats;
use crate::usual::check_slope;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaCase {
    /// `sigma_delta²` estimated jointly (closed form).
    UnknownDelta,
    /// `sigma_delta²` supplied externally; `(beta, sigma_eps²)` solved iteratively.
    KnownDelta,
}

/// Convergence record of the known-delta solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub scaled_residual: f64,
    /// The Newton iteration from the closed-form start failed and the root
    /// was located by bracketing before the final Newton polish.
    pub bracketed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlledFit {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub x0_hat: f64,
    pub sigma_eps_sq_hat: f64,
    /// Estimated for [`DeltaCase::UnknownDelta`], echoed for
    /// [`DeltaCase::KnownDelta`].
    pub sigma_delta_sq_hat: f64,
    pub case: DeltaCase,
    pub gamma_hat: f64,
    /// Set when the unknown-delta estimate of `sigma_delta²` came out
    /// negative: the data are not compatible with the error model.
    pub negative_delta_variance: bool,
    pub solver: Option<SolverReport>,
}

impl ControlledFit {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            alpha: self.alpha_hat,
            beta: self.beta_hat,
            x0: self.x0_hat,
            sigma_eps_sq: self.sigma_eps_sq_hat,
            sigma_delta_sq: self.sigma_delta_sq_hat,
        }
    }
}

/// Discriminant of the alternative stationary branch
/// `S_YY - 2 b S_XY + b² S_XX = 0` (as a quadratic in `b`).
///
/// It equals `4 (S_XY² - S_XX S_YY)`, which Cauchy–Schwarz makes
/// non-positive; it vanishes only for data lying exactly on a line, so the
/// branch never yields a usable slope.
pub fn alternative_branch_discriminant(stats: &SufficientStats) -> f64 {
    4.0 * (stats.s_xy * stats.s_xy - stats.s_xx * stats.s_yy)
}

/// Closed-form fit when `sigma_delta²` is unknown.
///
/// A negative `sigma_delta²` estimate is returned as-is with
/// [`ControlledFit::negative_delta_variance`] set.
pub fn fit_unknown_delta(stats: &SufficientStats) -> Result<ControlledFit> {
    debug_assert!(alternative_branch_discriminant(stats) <= 1e-9 * stats.s_xx * stats.s_yy);

    let beta_hat = stats.s_xy / stats.s_xx;
    let alpha_hat = stats.y_bar - beta_hat * stats.x_bar;
    check_slope(beta_hat, stats.y0_bar, alpha_hat)?;
    let x0_hat = (stats.y0_bar - alpha_hat) / beta_hat;

    let sigma_eps_sq_hat = stats.s_y0y0;
    let residual_ms = stats.residual_mean_square(beta_hat);
    let sigma_delta_sq_hat = (residual_ms - sigma_eps_sq_hat) / (beta_hat * beta_hat);
    let gamma_hat = beta_hat * beta_hat * sigma_delta_sq_hat + sigma_eps_sq_hat;

    Ok(ControlledFit {
        alpha_hat,
        beta_hat,
        x0_hat,
        sigma_eps_sq_hat,
        sigma_delta_sq_hat,
        case: DeltaCase::UnknownDelta,
        gamma_hat,
        negative_delta_variance: sigma_delta_sq_hat < 0.0,
        solver: None,
    })
}

/// Score equations in `(beta, sigma_eps²)` of the profile log-likelihood
/// with `sigma_delta²` fixed.
///
/// ```text
/// F1 = b d (s + b² d - S_YY + b S_XY) - (S_XY - b S_XX) s
/// F2 = k S_Y0Y0 / s² - k / s - n / g + n R(b) / g²
/// ```
///
/// with `d = sigma_delta²`, `s = sigma_eps²`, `g = s + b² d` and
/// `R(b) = S_YY - 2 b S_XY + b² S_XX`. Both residuals are scaled by the sum
/// of the magnitudes of their terms, so the convergence tolerance is a
/// relative, unit-free quantity.
#[derive(Debug, Clone, Copy)]
pub struct KnownDeltaSystem {
    pub stats: SufficientStats,
    pub sigma_delta_sq: f64,
}

impl KnownDeltaSystem {
    pub fn new(stats: &SufficientStats, sigma_delta_sq: f64) -> Self {
        Self {
            stats: *stats,
            sigma_delta_sq,
        }
    }

    fn terms(&self, b: f64, s: f64) -> ([f64; 2], [f64; 2]) {
        let st = &self.stats;
        let d = self.sigma_delta_sq;
        let n = st.n as f64;
        let k = st.k as f64;
        let g = s + b * b * d;
        let r = st.s_yy - 2.0 * b * st.s_xy + b * b * st.s_xx;

        let slope_lhs = b * d * (g - st.s_yy + b * st.s_xy);
        let slope_rhs = (st.s_xy - b * st.s_xx) * s;
        let f1 = slope_lhs - slope_rhs;
        let scale1 = (b * d).abs() * (g.abs() + st.s_yy.abs() + (b * st.s_xy).abs())
            + (st.s_xy.abs() + (b * st.s_xx).abs()) * s.abs();

        let t = [k * st.s_y0y0 / (s * s), k / s, n / g, n * r / (g * g)];
        let f2 = t[0] - t[1] - t[2] + t[3];
        let scale2 = t.iter().map(|v| v.abs()).sum::<f64>();

        ([f1, f2], [scale1, scale2])
    }
}

impl NonlinearSystem2 for KnownDeltaSystem {
    fn residual(&self, x: [f64; 2]) -> [f64; 2] {
        self.terms(x[0], x[1]).0
    }

    fn jacobian(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        let [b, s] = x;
        let st = &self.stats;
        let d = self.sigma_delta_sq;
        let n = st.n as f64;
        let k = st.k as f64;
        let g = s + b * b * d;
        let r = st.s_yy - 2.0 * b * st.s_xy + b * b * st.s_xx;
        let dg_db = 2.0 * b * d;
        let dr_db = 2.0 * (b * st.s_xx - st.s_xy);

        let df1_db = d * (g - st.s_yy + b * st.s_xy) + b * d * (dg_db + st.s_xy) + st.s_xx * s;
        let df1_ds = b * d - (st.s_xy - b * st.s_xx);

        let g2 = g * g;
        let g3 = g2 * g;
        let df2_db = n * dg_db / g2 + n * dr_db / g2 - 2.0 * n * r * dg_db / g3;
        let df2_ds = -2.0 * k * st.s_y0y0 / (s * s * s) + k / (s * s) + n / g2 - 2.0 * n * r / g3;

        [[df1_db, df1_ds], [df2_db, df2_ds]]
    }

    fn scale(&self, x: [f64; 2]) -> [f64; 2] {
        let [s1, s2] = self.terms(x[0], x[1]).1;
        [
            if s1 > 0.0 { s1 } else { 1.0 },
            if s2 > 0.0 { s2 } else { 1.0 },
        ]
    }

    fn admissible(&self, x: [f64; 2]) -> bool {
        x[0].is_finite() && x[1].is_finite() && x[1] > 0.0
    }
}

/// Largest scaled residual of the known-delta score equations at
/// `(beta, sigma_eps²)`.
pub fn known_delta_residual(stats: &SufficientStats, sigma_delta_sq: f64, beta: f64, sigma_eps_sq: f64) -> f64 {
    KnownDeltaSystem::new(stats, sigma_delta_sq).scaled_residual([beta, sigma_eps_sq])
}

/// Iterative fit when `sigma_delta²` is known. Starts from the
/// unknown-delta closed form `(S_XY / S_XX, S_Y0Y0)`.
pub fn fit_known_delta(stats: &SufficientStats, sigma_delta_sq: f64, cfg: &SolverConfig) -> Result<ControlledFit> {
    if !(sigma_delta_sq >= 0.0 && sigma_delta_sq.is_finite()) {
        return Err(CalibError::InvalidConfig(format!(
            "known sigma_delta_sq must be finite and >= 0, got {sigma_delta_sq}"
        )));
    }
    cfg.validate()?;

    let beta_init = stats.s_xy / stats.s_xx;
    check_slope(beta_init, stats.y0_bar, stats.y_bar - beta_init * stats.x_bar)?;
    let sigma_init = if stats.s_y0y0 > 0.0 {
        stats.s_y0y0
    } else {
        // Identical second-stage readings: fall back to the pooled residual variance.
        let n = stats.n as f64;
        let k = stats.k as f64;
        n * stats.residual_mean_square(beta_init) / (n + k)
    };
    if !(sigma_init > 0.0) {
        return Err(CalibError::NonPositiveVariance {
            sigma_eps_sq: sigma_init,
        });
    }

    let system = KnownDeltaSystem::new(stats, sigma_delta_sq);
    let direct = solve_newton_2d(&system, [beta_init, sigma_init], cfg);
    let (solution, bracketed) = match direct {
        Ok(sol) => (sol, false),
        Err(failure) => match bracket_known_delta(stats, sigma_delta_sq)
            .and_then(|start| solve_newton_2d(&system, start, cfg).ok())
        {
            Some(sol) => (sol, true),
            None => {
                let collapsed = failure.point[1] <= 1e-6 * sigma_init;
                return Err(if failure.kind == FailureKind::LeftDomain || collapsed {
                    CalibError::NonPositiveVariance {
                        sigma_eps_sq: failure.point[1],
                    }
                } else {
                    CalibError::from(failure)
                });
            }
        },
    };
    let [beta_hat, sigma_eps_sq_hat] = solution.point;
    if !(sigma_eps_sq_hat > 0.0) {
        return Err(CalibError::NonPositiveVariance {
            sigma_eps_sq: sigma_eps_sq_hat,
        });
    }

    let alpha_hat = stats.y_bar - beta_hat * stats.x_bar;
    check_slope(beta_hat, stats.y0_bar, alpha_hat)?;
    let x0_hat = (stats.y0_bar - alpha_hat) / beta_hat;

    Ok(ControlledFit {
        alpha_hat,
        beta_hat,
        x0_hat,
        sigma_eps_sq_hat,
        sigma_delta_sq_hat: sigma_delta_sq,
        case: DeltaCase::KnownDelta,
        gamma_hat: beta_hat * beta_hat * sigma_delta_sq + sigma_eps_sq_hat,
        negative_delta_variance: false,
        solver: Some(SolverReport {
            iterations: solution.iterations,
            scaled_residual: solution.residual,
            bracketed,
        }),
    })
}

/// Locates a root of the known-delta score equations without a starting
/// point.
///
/// The slope equation is linear in `s`, giving `s(b)`. On the interval of
/// `|b|` where `s(b) > 0` the remaining equation, multiplied by `s²`, runs
/// from negative (as `s` grows without bound) to `k S_Y0Y0 > 0` (as `s`
/// vanishes), so it changes sign at least once. Every sign change on a fine
/// grid is refined by bisection and the root with the largest
/// log-likelihood is returned.
fn bracket_known_delta(stats: &SufficientStats, d: f64) -> Option<[f64; 2]> {
    if !(d > 0.0 && stats.s_y0y0 > 0.0) {
        return None;
    }
    let n = stats.n as f64;
    let k = stats.k as f64;
    let sign = stats.s_xy.signum();
    let sxy = stats.s_xy.abs();
    let lo = sxy / (stats.s_xx + d);
    let hi = (-sxy + (sxy * sxy + 4.0 * d * stats.s_yy).sqrt()) / (2.0 * d);
    if !(hi > lo) {
        return None;
    }

    let s_of = |b: f64| b * d * (stats.s_yy - b * sxy - b * b * d) / (b * (d + stats.s_xx) - sxy);
    let r_of = |b: f64| stats.s_yy - 2.0 * b * sxy + b * b * stats.s_xx;
    let h = |b: f64| {
        let s = s_of(b);
        let g = s + b * b * d;
        k * stats.s_y0y0 - k * s - n * s * s / g + n * r_of(b) * s * s / (g * g)
    };
    let loglik = |b: f64| {
        let s = s_of(b);
        let g = s + b * b * d;
        -0.5 * n * (g.ln() + r_of(b) / g) - 0.5 * k * (s.ln() + stats.s_y0y0 / s)
    };

    const GRID: usize = 512;
    let at = |i: usize| lo + (hi - lo) * (i as f64 + 0.5) / GRID as f64;
    let mut best: Option<(f64, f64)> = None;
    let mut prev = (at(0), h(at(0)));
    for i in 1..GRID {
        let b = at(i);
        let hb = h(b);
        if prev.1.is_finite() && hb.is_finite() && (prev.1 < 0.0) != (hb < 0.0) {
            let (mut a, mut c, fa) = (prev.0, b, prev.1);
            for _ in 0..200 {
                let m = 0.5 * (a + c);
                if m <= a || m >= c {
                    break;
                }
                if (h(m) < 0.0) == (fa < 0.0) {
                    a = m;
                } else {
                    c = m;
                }
            }
            let root = 0.5 * (a + c);
            let ll = loglik(root);
            if s_of(root) > 0.0 && ll.is_finite() && best.is_none_or(|(_, l)| ll > l) {
                best = Some((root, ll));
            }
        }
        prev = (b, hb);
    }
    best.map(|(b, _)| [sign * b, s_of(b)])
}
