//! Monte Carlo study of the inverse estimator under the controlled model.
//!
//! Each replication draws a fresh two-stage dataset at a fixed design on
//! `[0, 2]`, fits every requested estimator, and records the point estimate
//! and its plug-in variances. Replications run in parallel; aggregation is
//! sequential in replicate order so results do not depend on the number of
//! worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controlled::{fit_known_delta, fit_unknown_delta};
use crate::error::{CalibError, Result};
use crate::inference::VarianceFormula;
use crate::numerics::{mix64, two_sided_z, NormalStream, SolverConfig};
use crate::params::ModelParams;
use crate::stats::{CalibrationData, Design};
use crate::usual::fit_usual;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Usual model, ignoring the error in the standards.
    UsualM,
    /// Controlled model, `sigma_delta²` estimated.
    ProposedUnknown,
    /// Controlled model, `sigma_delta²` fixed at its true value.
    ProposedKnown,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::UsualM, Estimator::ProposedUnknown, Estimator::ProposedKnown];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::UsualM => "usual_m",
            Estimator::ProposedUnknown => "proposed_unknown",
            Estimator::ProposedKnown => "proposed_known",
        }
    }

    pub fn formulas(self) -> &'static [VarianceFormula] {
        match self {
            Estimator::UsualM => &[VarianceFormula::V1Usual, VarianceFormula::V2Usual],
            Estimator::ProposedUnknown => &[VarianceFormula::V1Controlled, VarianceFormula::V2Controlled],
            Estimator::ProposedKnown => &[VarianceFormula::VKnownDelta],
        }
    }
}

/// One cell of the simulation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub k: usize,
    pub x0_true: f64,
    pub alpha_true: f64,
    pub beta_true: f64,
    pub sigma_eps_sq: f64,
    pub sigma_delta_sq: f64,
    pub replications: usize,
    pub confidence_level: f64,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl SimConfig {
    /// The reference study settings for one `(n, k, x0, sigma_delta²)` cell.
    pub fn study_cell(n: usize, k: usize, x0_true: f64, sigma_delta_sq: f64) -> Self {
        Self {
            n,
            k,
            x0_true,
            alpha_true: 0.1,
            beta_true: 2.0,
            sigma_eps_sq: 0.04,
            sigma_delta_sq,
            replications: 2000,
            confidence_level: 0.95,
            seed: 20_240_601,
            estimators: Estimator::ALL.to_vec(),
            solver: SolverConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CalibError::InvalidConfig(msg));
        if self.n < 3 || self.k < 2 {
            return Err(CalibError::TooFewPoints { n: self.n, k: self.k });
        }
        if self.replications == 0 {
            return bad("replications must be >= 1".into());
        }
        for (name, v) in [("sigma_eps_sq", self.sigma_eps_sq), ("sigma_delta_sq", self.sigma_delta_sq)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        for (name, v) in [("x0", self.x0_true), ("alpha", self.alpha_true), ("beta", self.beta_true)] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite, got {v}"));
            }
        }
        if self.beta_true == 0.0 {
            return bad("beta must be non-zero".into());
        }
        if self.estimators.is_empty() {
            return bad("at least one estimator is required".into());
        }
        two_sided_z(self.confidence_level)?;
        self.solver.validate()
    }

    pub fn true_params(&self) -> ModelParams {
        ModelParams {
            alpha: self.alpha_true,
            beta: self.beta_true,
            x0: self.x0_true,
            sigma_eps_sq: self.sigma_eps_sq,
            sigma_delta_sq: self.sigma_delta_sq,
        }
    }

    pub fn design(&self) -> Design {
        Design::from_x(&design_points(self.n), self.k)
    }

    /// Identifier of the cell's model settings. Depends on parameter values
    /// only, never on the cell's position in a grid or on the replication
    /// count, so a longer run extends a shorter one.
    pub fn cell_id(&self) -> u64 {
        let fields = [
            self.n as u64,
            self.k as u64,
            self.x0_true.to_bits(),
            self.alpha_true.to_bits(),
            self.beta_true.to_bits(),
            self.sigma_eps_sq.to_bits(),
            self.sigma_delta_sq.to_bits(),
        ];
        fields.iter().fold(0x5EED_CA11_B4A7_E000, |h, &f| mix64(h ^ f))
    }
}

/// Equally spaced design `x_i = 2 i / (n - 1)`, `i = 0..n`.
pub fn design_points(n: usize) -> Vec<f64> {
    (0..n).map(|i| 2.0 * i as f64 / (n - 1) as f64).collect()
}

/// Draws replicate `replicate` of the cell. For each standard the
/// equation error is drawn before the control error; the second-stage
/// errors follow.
pub fn generate_dataset(cfg: &SimConfig, replicate: u64) -> CalibrationData {
    let mut stream = NormalStream::substream(cfg.seed, cfg.cell_id(), replicate);
    let sd_eps = cfg.sigma_eps_sq.sqrt();
    let sd_delta = cfg.sigma_delta_sq.sqrt();
    let (a, b) = (cfg.alpha_true, cfg.beta_true);

    let first = design_points(cfg.n)
        .into_iter()
        .map(|x| {
            let eps = stream.draw_normal(0.0, sd_eps);
            let delta = stream.draw_normal(0.0, sd_delta);
            (x, a + b * x + eps - b * delta)
        })
        .collect();
    let mean0 = a + b * cfg.x0_true;
    let second = (0..cfg.k).map(|_| stream.draw_normal(mean0, sd_eps)).collect();
    CalibrationData::from_parts_unchecked(first, second)
}

/// Fitted quantities of one estimator on one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateFit {
    pub x0_hat: f64,
    /// Plug-in variance per formula of the estimator; `Err` when the formula
    /// is undefined at the fitted point.
    pub variances: Vec<Result<f64>>,
    pub solver_residual: Option<f64>,
}

pub fn fit_replicate(estimator: Estimator, data: &CalibrationData, cfg: &SimConfig) -> Result<ReplicateFit> {
    let stats = data.summarize();
    let design = stats.design();
    let (params, solver_residual) = match estimator {
        Estimator::UsualM => (fit_usual(&stats)?.params(), None),
        Estimator::ProposedUnknown => (fit_unknown_delta(&stats)?.params(), None),
        Estimator::ProposedKnown => {
            let fit = fit_known_delta(&stats, cfg.sigma_delta_sq, &cfg.solver)?;
            (fit.params(), fit.solver.map(|s| s.scaled_residual))
        }
    };
    Ok(ReplicateFit {
        x0_hat: params.x0,
        variances: estimator.formulas().iter().map(|f| f.variance(&params, &design)).collect(),
        solver_residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulaSummary {
    pub formula: VarianceFormula,
    /// Formula evaluated at the true parameters.
    pub theoretical_variance: Option<f64>,
    pub theoretical_bias: Option<f64>,
    /// Mean of the plug-in variance over replications where it is positive.
    pub mean_estimated_variance: f64,
    /// Percentage of intervals containing the true `x0`, over replications
    /// with a positive plug-in variance.
    pub coverage_pct: Option<f64>,
    /// Mean full interval width.
    pub mean_amplitude: Option<f64>,
    /// Replications whose plug-in variance was non-positive or undefined.
    pub n_degenerate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    pub replications_used: usize,
    pub n_failed: usize,
    /// Failure messages with their counts, in first-seen order.
    pub failures: Vec<(String, usize)>,
    pub empirical_bias: f64,
    pub bias_std_error: f64,
    pub empirical_mse: f64,
    /// Sample variance of the estimates (divisor `m - 1`).
    pub empirical_variance: f64,
    /// Largest scaled solver residual over converged replications.
    pub max_solver_residual: Option<f64>,
    pub formulas: Vec<FormulaSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub config: SimConfig,
    pub estimators: Vec<EstimatorSummary>,
}

impl SimSummary {
    pub fn estimator(&self, e: Estimator) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|s| s.estimator == e)
    }
}

impl EstimatorSummary {
    pub fn formula(&self, f: VarianceFormula) -> Option<&FormulaSummary> {
        self.formulas.iter().find(|s| s.formula == f)
    }
}

pub fn run_cell(cfg: &SimConfig) -> Result<SimSummary> {
    cfg.validate()?;
    let outcomes: Vec<Vec<Result<ReplicateFit>>> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| {
            let data = generate_dataset(cfg, r);
            cfg.estimators.iter().map(|&e| fit_replicate(e, &data, cfg)).collect()
        })
        .collect();

    let estimators = cfg
        .estimators
        .iter()
        .enumerate()
        .map(|(j, &e)| aggregate(cfg, e, outcomes.iter().map(|row| &row[j])))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimSummary {
        config: cfg.clone(),
        estimators,
    })
}

fn aggregate<'a>(
    cfg: &SimConfig,
    estimator: Estimator,
    outcomes: impl Iterator<Item = &'a Result<ReplicateFit>>,
) -> Result<EstimatorSummary> {
    let formulas = estimator.formulas();
    let truth = cfg.true_params();
    let design = cfg.design();
    let z = two_sided_z(cfg.confidence_level)?;

    let mut failures: Vec<(String, usize)> = Vec::new();
    let mut errors = Vec::new();
    let mut max_residual: Option<f64> = None;
    let mut var_sum = vec![0.0; formulas.len()];
    let mut n_valid = vec![0usize; formulas.len()];
    let mut n_covered = vec![0usize; formulas.len()];
    let mut width_sum = vec![0.0; formulas.len()];

    for outcome in outcomes {
        let fit = match outcome {
            Ok(fit) => fit,
            Err(e) => {
                let msg = e.to_string();
                match failures.iter_mut().find(|(m, _)| *m == msg) {
                    Some((_, c)) => *c += 1,
                    None => failures.push((msg, 1)),
                }
                continue;
            }
        };
        errors.push(fit.x0_hat - cfg.x0_true);
        if let Some(r) = fit.solver_residual {
            max_residual = Some(max_residual.map_or(r, |m: f64| m.max(r)));
        }
        for (i, v) in fit.variances.iter().enumerate() {
            let Ok(v) = v else { continue };
            if !(*v > 0.0 && v.is_finite()) {
                continue;
            }
            n_valid[i] += 1;
            var_sum[i] += v;
            let half = z * v.sqrt();
            width_sum[i] += 2.0 * half;
            if (fit.x0_hat - cfg.x0_true).abs() <= half {
                n_covered[i] += 1;
            }
        }
    }

    let m = errors.len();
    if m == 0 {
        return Err(CalibError::AllReplicationsFailed {
            estimator: estimator.name(),
        });
    }
    let mf = m as f64;
    let bias = errors.iter().sum::<f64>() / mf;
    let mse = errors.iter().map(|e| e * e).sum::<f64>() / mf;
    let empirical_variance = if m > 1 {
        errors.iter().map(|e| (e - bias) * (e - bias)).sum::<f64>() / (mf - 1.0)
    } else {
        0.0
    };

    let formulas = formulas
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let valid = n_valid[i];
            let pct = |count: usize| 100.0 * count as f64 / valid as f64;
            FormulaSummary {
                formula: f,
                theoretical_variance: f.variance(&truth, &design).ok(),
                theoretical_bias: f.bias(&truth, &design).ok(),
                mean_estimated_variance: if valid > 0 { var_sum[i] / valid as f64 } else { 0.0 },
                coverage_pct: (valid > 0).then(|| pct(n_covered[i])),
                mean_amplitude: (valid > 0).then(|| width_sum[i] / valid as f64),
                n_degenerate: m - valid,
            }
        })
        .collect();

    Ok(EstimatorSummary {
        estimator,
        replications_used: m,
        n_failed: cfg.replications - m,
        failures,
        empirical_bias: bias,
        bias_std_error: (empirical_variance / mf).sqrt(),
        empirical_mse: mse,
        empirical_variance,
        max_solver_residual: max_residual,
        formulas,
    })
}

/// Runs every cell; cells and their replications may execute concurrently.
/// Results are returned in input order.
pub fn run_grid(cells: &[SimConfig]) -> Vec<Result<SimSummary>> {
    cells.par_iter().map(run_cell).collect()
}

/// [`run_grid`] on a dedicated pool of `threads` workers.
pub fn run_grid_with_threads(cells: &[SimConfig], threads: usize) -> Result<Vec<Result<SimSummary>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CalibError::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(|| run_grid(cells)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize, k: usize, reps: usize) -> SimConfig {
        SimConfig {
            replications: reps,
            ..SimConfig::study_cell(n, k, 0.8, 0.01)
        }
    }

    #[test]
    fn five_point_design() {
        assert_eq!(design_points(5), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        let d = design_points(100);
        assert_eq!(d[0], 0.0);
        assert!((d[99] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn noiseless_dataset_on_the_line() {
        let cfg = SimConfig {
            sigma_eps_sq: 0.0,
            sigma_delta_sq: 0.0,
            ..small(6, 3, 1)
        };
        let data = generate_dataset(&cfg, 0);
        for &(x, y) in data.first_stage() {
            assert_eq!(y, 0.1 + 2.0 * x);
        }
        assert!(data.second_stage().iter().all(|&y| y == 0.1 + 2.0 * 0.8));
    }

    #[test]
    fn noiseless_cell_has_zero_error_and_flags_degenerate_variance() {
        let cfg = SimConfig {
            x0_true: 0.5,
            sigma_eps_sq: 0.0,
            sigma_delta_sq: 0.0,
            estimators: vec![Estimator::UsualM, Estimator::ProposedUnknown],
            ..small(5, 2, 20)
        };
        let s = run_cell(&cfg).unwrap();
        for e in &s.estimators {
            assert_eq!(e.empirical_bias, 0.0);
            assert_eq!(e.empirical_mse, 0.0);
            for f in &e.formulas {
                assert_eq!(f.n_degenerate, 20);
                assert_eq!(f.coverage_pct, None);
            }
        }
    }

    #[test]
    fn known_delta_on_noiseless_data_fails_every_replication() {
        let cfg = SimConfig {
            sigma_eps_sq: 0.0,
            sigma_delta_sq: 0.0,
            estimators: vec![Estimator::ProposedKnown],
            ..small(5, 2, 3)
        };
        assert!(matches!(run_cell(&cfg), Err(CalibError::AllReplicationsFailed { .. })));
    }

    #[test]
    fn deterministic_and_prefix_stable() {
        let cfg = small(5, 2, 50);
        assert_eq!(run_cell(&cfg).unwrap(), run_cell(&cfg).unwrap());
        let a = generate_dataset(&cfg, 7);
        let longer = SimConfig { replications: 500, ..cfg.clone() };
        assert_eq!(a, generate_dataset(&longer, 7));
        assert_ne!(a, generate_dataset(&cfg, 8));
    }

    #[test]
    fn seed_changes_data() {
        let cfg = small(5, 2, 1);
        let other = SimConfig { seed: 1, ..cfg.clone() };
        assert_ne!(generate_dataset(&cfg, 0), generate_dataset(&other, 0));
    }

    #[test]
    fn grid_order_does_not_matter() {
        let a = small(5, 2, 40);
        let b = SimConfig { x0_true: 1.9, ..small(20, 20, 40) };
        let fwd = run_grid(&[a.clone(), b.clone()]);
        let rev = run_grid(&[b, a]);
        assert_eq!(fwd[0].as_ref().unwrap(), rev[1].as_ref().unwrap());
        assert_eq!(fwd[1].as_ref().unwrap(), rev[0].as_ref().unwrap());
    }

    #[test]
    fn worker_count_does_not_matter() {
        let cells = [small(5, 20, 64), small(20, 2, 64)];
        let one = run_grid_with_threads(&cells, 1).unwrap();
        let four = run_grid_with_threads(&cells, 4).unwrap();
        for (x, y) in one.iter().zip(&four) {
            assert_eq!(x.as_ref().unwrap(), y.as_ref().unwrap());
        }
    }

    #[test]
    fn summary_invariants() {
        let s = run_cell(&small(5, 2, 300)).unwrap();
        for e in &s.estimators {
            assert_eq!(e.replications_used + e.n_failed, 300);
            assert!(e.empirical_mse >= e.empirical_bias * e.empirical_bias);
            for f in &e.formulas {
                let c = f.coverage_pct.unwrap();
                assert!((0.0..=100.0).contains(&c));
            }
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = small(5, 2, 1);
        let cases = [
            SimConfig { n: 2, ..base.clone() },
            SimConfig { replications: 0, ..base.clone() },
            SimConfig { sigma_eps_sq: -1.0, ..base.clone() },
            SimConfig { confidence_level: 1.0, ..base.clone() },
            SimConfig { estimators: vec![], ..base.clone() },
        ];
        for c in cases {
            assert!(run_cell(&c).is_err(), "{c:?}");
        }
    }
}
