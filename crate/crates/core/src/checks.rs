//! Self-checks of the closed-form results: algebraic reductions, information
//! inverse identities, and Monte Carlo oracles for the information matrices
//! and the second-order bias and variance.

use rayon::prelude::*;
use serde::Serialize;

use crate::controlled::fit_unknown_delta;
use crate::error::Result;
use crate::inference::{
    bias_controlled, fisher_controlled_known, fisher_controlled_unknown, variance_known_delta,
    variance_v1_controlled, variance_v2_controlled,
};
use crate::numerics::{invert, Matrix, NormalStream, DEFAULT_CONDITION_GUARD};
use crate::params::ModelParams;
use crate::simulation::{design_points, generate_dataset, Estimator, SimConfig};
use crate::stats::{CalibrationData, Design};
use crate::usual::{fisher_usual, variance_v1_usual, variance_v2_usual};

/// Which likelihood an information check targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LikelihoodModel {
    /// Parameters `(alpha, beta, x0, sigma²)`.
    Usual,
    /// Parameters `(alpha, beta, x0, sigma_delta², sigma_eps²)`.
    ControlledUnknown,
    /// Parameters `(alpha, beta, x0, sigma_eps²)` with `sigma_delta²` fixed.
    ControlledKnown,
}

impl LikelihoodModel {
    pub fn dim(self) -> usize {
        match self {
            LikelihoodModel::ControlledUnknown => 5,
            _ => 4,
        }
    }

    pub fn pack(self, p: &ModelParams) -> Vec<f64> {
        match self {
            LikelihoodModel::Usual | LikelihoodModel::ControlledKnown => vec![p.alpha, p.beta, p.x0, p.sigma_eps_sq],
            LikelihoodModel::ControlledUnknown => vec![p.alpha, p.beta, p.x0, p.sigma_delta_sq, p.sigma_eps_sq],
        }
    }

    /// Inverse of [`pack`](Self::pack); `template` supplies the fixed `sigma_delta²`.
    pub fn unpack(self, theta: &[f64], template: &ModelParams) -> ModelParams {
        match self {
            LikelihoodModel::Usual => ModelParams {
                alpha: theta[0],
                beta: theta[1],
                x0: theta[2],
                sigma_eps_sq: theta[3],
                sigma_delta_sq: 0.0,
            },
            LikelihoodModel::ControlledKnown => ModelParams {
                alpha: theta[0],
                beta: theta[1],
                x0: theta[2],
                sigma_eps_sq: theta[3],
                sigma_delta_sq: template.sigma_delta_sq,
            },
            LikelihoodModel::ControlledUnknown => ModelParams {
                alpha: theta[0],
                beta: theta[1],
                x0: theta[2],
                sigma_delta_sq: theta[3],
                sigma_eps_sq: theta[4],
            },
        }
    }

    pub fn fisher(self, p: &ModelParams, d: &Design) -> Result<Matrix> {
        match self {
            LikelihoodModel::Usual => fisher_usual(p, d),
            LikelihoodModel::ControlledUnknown => fisher_controlled_unknown(p, d),
            LikelihoodModel::ControlledKnown => fisher_controlled_known(p, d),
        }
    }

    /// Log-likelihood up to an additive constant.
    pub fn log_likelihood(self, p: &ModelParams, data: &CalibrationData) -> f64 {
        let n = data.n() as f64;
        let k = data.k() as f64;
        let rss1: f64 = data
            .first_stage()
            .iter()
            .map(|&(x, y)| {
                let r = y - p.alpha - p.beta * x;
                r * r
            })
            .sum();
        let mean0 = p.alpha + p.beta * p.x0;
        let rss2: f64 = data.second_stage().iter().map(|&y| (y - mean0) * (y - mean0)).sum();
        let g = match self {
            LikelihoodModel::Usual => p.sigma_eps_sq,
            _ => p.gamma(),
        };
        let s = p.sigma_eps_sq;
        -0.5 * n * g.ln() - rss1 / (2.0 * g) - 0.5 * k * s.ln() - rss2 / (2.0 * s)
    }
}

/// Central-difference Hessian of the log-likelihood at `p`.
pub fn numeric_hessian(model: LikelihoodModel, p: &ModelParams, data: &CalibrationData) -> Matrix {
    let theta = model.pack(p);
    let dim = theta.len();
    let h: Vec<f64> = theta.iter().map(|t| 1e-3 * t.abs().max(1e-2)).collect();
    let ll = |t: &[f64]| model.log_likelihood(&model.unpack(t, p), data);
    let mut out = Matrix::zeros(dim);
    for i in 0..dim {
        for j in i..dim {
            let eval = |si: f64, sj: f64| {
                let mut t = theta.clone();
                t[i] += si * h[i];
                t[j] += sj * h[j];
                ll(&t)
            };
            let v = if i == j {
                let mut tp = theta.clone();
                tp[i] += 2.0 * h[i];
                let mut tm = theta.clone();
                tm[i] -= 2.0 * h[i];
                (ll(&tp) - 2.0 * ll(&theta) + ll(&tm)) / (4.0 * h[i] * h[i])
            } else {
                (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h[i] * h[j])
            };
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Entrywise comparison of a closed-form information matrix with the Monte
/// Carlo mean of the negative numeric Hessian.
#[derive(Debug, Clone, Serialize)]
pub struct HessianComparison {
    pub model: LikelihoodModel,
    pub datasets: usize,
    pub fisher: Vec<Vec<f64>>,
    pub mc_mean: Vec<Vec<f64>>,
    pub mc_std_error: Vec<Vec<f64>>,
    /// Largest `|mc - fisher| / allowance` over the upper triangle, where the
    /// allowance is the MC standard error plus a floor for entries that do not
    /// vary across datasets.
    pub worst_z: f64,
    pub worst_entry: (usize, usize),
}

impl HessianComparison {
    pub fn passes(&self, z: f64) -> bool {
        self.worst_z <= z
    }
}

/// Datasets are drawn at `truth`; the usual model is checked on data with
/// `sigma_delta² = 0`, where it is correctly specified.
pub fn fisher_vs_hessian(
    model: LikelihoodModel,
    truth: &ModelParams,
    n: usize,
    k: usize,
    datasets: usize,
    seed: u64,
) -> Result<HessianComparison> {
    let truth = match model {
        LikelihoodModel::Usual => truth.with_sigma_delta_sq(0.0),
        _ => *truth,
    };
    let cfg = SimConfig {
        n,
        k,
        x0_true: truth.x0,
        alpha_true: truth.alpha,
        beta_true: truth.beta,
        sigma_eps_sq: truth.sigma_eps_sq,
        sigma_delta_sq: truth.sigma_delta_sq,
        replications: datasets,
        confidence_level: 0.95,
        seed,
        estimators: vec![Estimator::UsualM],
        solver: Default::default(),
    };
    cfg.validate()?;
    let design = Design::from_x(&design_points(n), k);
    let fisher = model.fisher(&truth, &design)?;
    let dim = model.dim();

    let hessians: Vec<Matrix> = (0..datasets as u64)
        .into_par_iter()
        .map(|r| numeric_hessian(model, &truth, &generate_dataset(&cfg, r)))
        .collect();

    let m = datasets as f64;
    let mut mean = Matrix::zeros(dim);
    for hmat in &hessians {
        for i in 0..dim {
            for j in 0..dim {
                mean[(i, j)] -= hmat[(i, j)] / m;
            }
        }
    }
    let mut se = Matrix::zeros(dim);
    for hmat in &hessians {
        for i in 0..dim {
            for j in 0..dim {
                let d = -hmat[(i, j)] - mean[(i, j)];
                se[(i, j)] += d * d;
            }
        }
    }
    for i in 0..dim {
        for j in 0..dim {
            se[(i, j)] = (se[(i, j)] / (m - 1.0) / m).sqrt();
        }
    }

    let mut worst_z = 0.0;
    let mut worst_entry = (0, 0);
    for i in 0..dim {
        for j in i..dim {
            let scale = (fisher[(i, i)] * fisher[(j, j)]).abs().sqrt();
            let allowance = se[(i, j)] + 1e-6 * scale;
            let z = (mean[(i, j)] - fisher[(i, j)]).abs() / allowance;
            if z > worst_z {
                worst_z = z;
                worst_entry = (i, j);
            }
        }
    }
    let rows = |mat: &Matrix| mat.rows().map(|r| r.to_vec()).collect::<Vec<_>>();
    Ok(HessianComparison {
        model,
        datasets,
        fisher: rows(&fisher),
        mc_mean: rows(&mean),
        mc_std_error: rows(&se),
        worst_z,
        worst_entry,
    })
}

/// Worst relative discrepancy found by an identity check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IdentityReport {
    pub points: usize,
    pub max_rel_error: f64,
}

/// Random valid parameter points and designs.
pub fn random_points(count: usize, seed: u64) -> Vec<(ModelParams, Design)> {
    let mut s = NormalStream::new(seed);
    (0..count)
        .map(|_| {
            let mut u = |lo: f64, hi: f64| lo + (hi - lo) * s.next_open_unit();
            let sign = if u(0.0, 1.0) < 0.5 { -1.0 } else { 1.0 };
            let params = ModelParams {
                alpha: u(-1.0, 1.0),
                beta: sign * u(0.3, 4.0),
                x0: u(-0.5, 2.5),
                sigma_eps_sq: u(0.005, 0.5),
                sigma_delta_sq: u(0.0, 0.3),
            };
            let n = u(3.0, 60.0) as usize;
            let k = u(2.0, 60.0) as usize;
            (params, Design::from_x(&design_points(n), k))
        })
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

/// Controlled V1, V2 and the known-delta variance at `sigma_delta² = 0`
/// against the usual-model V1 and V2.
pub fn zero_delta_reductions(points: &[(ModelParams, Design)]) -> Result<[IdentityReport; 3]> {
    let mut worst = [0.0f64; 3];
    for (p, d) in points {
        let p = p.with_sigma_delta_sq(0.0);
        let v1 = variance_v1_usual(&p, d)?;
        worst[0] = worst[0].max(rel(variance_v1_controlled(&p, d)?, v1));
        worst[1] = worst[1].max(rel(variance_v2_controlled(&p, d)?, variance_v2_usual(&p, d)?));
        worst[2] = worst[2].max(rel(variance_known_delta(&p, d)?, v1));
    }
    Ok(worst.map(|max_rel_error| IdentityReport {
        points: points.len(),
        max_rel_error,
    }))
}

/// The `(x0, x0)` entries of the inverted information matrices against the
/// closed-form variances: usual V1, known-delta, and controlled V1.
pub fn information_inverse_identities(points: &[(ModelParams, Design)]) -> Result<[IdentityReport; 3]> {
    let mut worst = [0.0f64; 3];
    for (p, d) in points {
        let usual = p.with_sigma_delta_sq(0.0);
        let inv = invert(&fisher_usual(&usual, d)?, DEFAULT_CONDITION_GUARD)?;
        worst[0] = worst[0].max(rel(inv[(2, 2)], variance_v1_usual(&usual, d)?));
        let inv = invert(&fisher_controlled_known(p, d)?, DEFAULT_CONDITION_GUARD)?;
        worst[1] = worst[1].max(rel(inv[(2, 2)], variance_known_delta(p, d)?));
        let inv = invert(&fisher_controlled_unknown(p, d)?, DEFAULT_CONDITION_GUARD)?;
        worst[2] = worst[2].max(rel(inv[(2, 2)], variance_v1_controlled(p, d)?));
    }
    Ok(worst.map(|max_rel_error| IdentityReport {
        points: points.len(),
        max_rel_error,
    }))
}

/// Monte Carlo check of the controlled-model bias and fixed-`k` variance.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExpansionCheck {
    pub replications: usize,
    pub empirical_bias: f64,
    pub bias_std_error: f64,
    pub predicted_bias: f64,
    pub empirical_variance: f64,
    pub predicted_variance: f64,
}

impl ExpansionCheck {
    pub fn bias_z(&self) -> f64 {
        (self.empirical_bias - self.predicted_bias).abs() / self.bias_std_error
    }

    pub fn variance_rel_error(&self) -> f64 {
        (self.empirical_variance / self.predicted_variance - 1.0).abs()
    }
}

pub fn expansion_check(cfg: &SimConfig) -> Result<ExpansionCheck> {
    let cfg = SimConfig {
        estimators: vec![Estimator::ProposedUnknown],
        ..cfg.clone()
    };
    cfg.validate()?;
    let estimates: Vec<f64> = (0..cfg.replications as u64)
        .into_par_iter()
        .filter_map(|r| {
            let stats = generate_dataset(&cfg, r).summarize();
            fit_unknown_delta(&stats).ok().map(|f| f.x0_hat)
        })
        .collect();
    let m = estimates.len() as f64;
    let errors: Vec<f64> = estimates.iter().map(|x| x - cfg.x0_true).collect();
    let bias = errors.iter().sum::<f64>() / m;
    let var = errors.iter().map(|e| (e - bias) * (e - bias)).sum::<f64>() / (m - 1.0);
    let truth = cfg.true_params();
    let design = cfg.design();
    Ok(ExpansionCheck {
        replications: estimates.len(),
        empirical_bias: bias,
        bias_std_error: (var / m).sqrt(),
        predicted_bias: bias_controlled(&truth, &design)?,
        empirical_variance: var,
        predicted_variance: variance_v2_controlled(&truth, &design)?,
    })
}

/// Outcome of one named self-check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }

    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

/// Parameter point of the information-matrix checks.
pub fn reference_point() -> ModelParams {
    ModelParams {
        alpha: 0.1,
        beta: 2.0,
        x0: 0.8,
        sigma_eps_sq: 0.04,
        sigma_delta_sq: 0.01,
    }
}

/// Runs every self-check. `fast` trades Monte Carlo size for speed.
pub fn run_all(fast: bool) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let points = random_points(100, 0xC0FF_EE00);

    match zero_delta_reductions(&points) {
        Ok([v1, v2, known]) => {
            let names = [
                ("controlled V1 reduces to usual V1 at sigma_delta_sq = 0", v1),
                ("controlled V2 reduces to usual V2 at sigma_delta_sq = 0", v2),
                ("known-delta variance reduces to usual V1 at sigma_delta_sq = 0", known),
            ];
            for (name, r) in names {
                out.push(CheckOutcome::new(
                    name,
                    r.max_rel_error <= 1e-12,
                    format!("max relative error {:.2e} over {} points", r.max_rel_error, r.points),
                ));
            }
        }
        Err(e) => out.push(CheckOutcome::new("sigma_delta_sq = 0 reductions", false, format!("error: {e}"))),
    }

    match information_inverse_identities(&points) {
        Ok([usual, known, unknown]) => {
            let names = [
                ("usual V1 equals inverse information entry", usual, 1e-10),
                ("known-delta variance equals inverse information entry", known, 1e-10),
                ("controlled V1 equals inverse information entry", unknown, 1e-9),
            ];
            for (name, r, tol) in names {
                out.push(CheckOutcome::new(
                    name,
                    r.max_rel_error <= tol,
                    format!("max relative error {:.2e} over {} points", r.max_rel_error, r.points),
                ));
            }
        }
        Err(e) => out.push(CheckOutcome::new("information inverse identities", false, format!("error: {e}"))),
    }

    let datasets = if fast { 2000 } else { 10_000 };
    for (model, label) in [
        (LikelihoodModel::Usual, "usual"),
        (LikelihoodModel::ControlledUnknown, "controlled, sigma_delta_sq unknown"),
        (LikelihoodModel::ControlledKnown, "controlled, sigma_delta_sq known"),
    ] {
        let name = format!("information matrix matches Monte Carlo Hessian ({label})");
        let r = fisher_vs_hessian(model, &reference_point(), 20, 20, datasets, 0xF15E_0001).map(|c| {
            (
                c.passes(3.0),
                format!(
                    "worst entry {:?}: {:.2} standard errors over {} datasets",
                    c.worst_entry, c.worst_z, c.datasets
                ),
            )
        });
        out.push(CheckOutcome::from_result(&name, r));
    }

    let cfg = SimConfig {
        replications: if fast { 2000 } else { 5000 },
        ..SimConfig::study_cell(100, 2, 0.01, 0.1)
    };
    let r = expansion_check(&cfg).map(|c| {
        (
            c.bias_z() <= 3.0 && c.variance_rel_error() <= 0.10,
            format!(
                "bias {:.5} vs {:.5} ({:.2} s.e.), variance {:.5} vs {:.5} ({:.1}%)",
                c.empirical_bias,
                c.predicted_bias,
                c.bias_z(),
                c.empirical_variance,
                c.predicted_variance,
                100.0 * c.variance_rel_error()
            ),
        )
    });
    out.push(CheckOutcome::from_result(
        "second-order bias and fixed-k variance match Monte Carlo (n=100, k=2)",
        r,
    ));
    out
}
