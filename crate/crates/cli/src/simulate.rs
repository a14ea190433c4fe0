//! The `simulate` command: a grid of Monte Carlo cells from a TOML file.
//!
//! ```toml
//! [defaults]
//! alpha = 0.1
//! beta = 2.0
//! sigma_eps_sq = 0.04
//! replications = 2000
//! confidence_level = 0.95
//! seed = 20240601
//! estimators = ["usual_m", "proposed_unknown", "proposed_known"]
//!
//! [grid]
//! x0 = [0.01, 0.8, 1.9]
//! n = [5, 20, 100]
//! k = [2, 20, 100]
//! sigma_delta_sq = [0.01]
//! ```
//!
//! Cells are enumerated with `x0` outermost, then `n`, `k`, `sigma_delta_sq`.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use berkcal::simulation::{run_grid, run_grid_with_threads, Estimator, SimConfig, SimSummary};
use berkcal::SolverConfig;
use clap::ValueEnum;
use serde::Deserialize;

use crate::UsageError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub defaults: Defaults,
    pub grid: Grid,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_sigma_eps_sq")]
    pub sigma_eps_sq: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_level")]
    pub confidence_level: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
}

fn default_alpha() -> f64 {
    0.1
}
fn default_beta() -> f64 {
    2.0
}
fn default_sigma_eps_sq() -> f64 {
    0.04
}
fn default_replications() -> usize {
    2000
}
fn default_level() -> f64 {
    0.95
}
fn default_estimators() -> Vec<Estimator> {
    Estimator::ALL.to_vec()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub x0: Vec<f64>,
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub sigma_delta_sq: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum SimFormat {
    /// One row per cell, estimator and variance formula.
    #[default]
    Csv,
    /// One line per cell with the headline statistics.
    Table,
}

pub fn parse_grid(text: &str) -> Result<GridFile> {
    toml::from_str(text).map_err(|e| UsageError(format!("grid config: {e}")).into())
}

/// Expands the grid, applying the command-line overrides.
pub fn cells(grid: &GridFile, reps: Option<usize>, seed: Option<u64>) -> Vec<SimConfig> {
    let d = &grid.defaults;
    let mut out = Vec::new();
    for &x0 in &grid.grid.x0 {
        for &n in &grid.grid.n {
            for &k in &grid.grid.k {
                for &sd in &grid.grid.sigma_delta_sq {
                    out.push(SimConfig {
                        n,
                        k,
                        x0_true: x0,
                        alpha_true: d.alpha,
                        beta_true: d.beta,
                        sigma_eps_sq: d.sigma_eps_sq,
                        sigma_delta_sq: sd,
                        replications: reps.unwrap_or(d.replications),
                        confidence_level: d.confidence_level,
                        seed: seed.unwrap_or(d.seed),
                        estimators: d.estimators.clone(),
                        solver: SolverConfig::default(),
                    });
                }
            }
        }
    }
    out
}

const CSV_HEADER: &str = "n,k,x0,sigma_delta_sq,replications,estimator,formula,replications_used,n_failed,\
empirical_bias,bias_std_error,empirical_mse,empirical_variance,theoretical_variance,theoretical_bias,\
mean_estimated_variance,coverage_pct,mean_amplitude,n_degenerate,error";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

fn csv_rows(cfg: &SimConfig, result: &berkcal::Result<SimSummary>, out: &mut String) {
    let key = format!(
        "{},{},{:?},{:?},{}",
        cfg.n, cfg.k, cfg.x0_true, cfg.sigma_delta_sq, cfg.replications
    );
    let summary = match result {
        Ok(s) => s,
        Err(e) => {
            let msg = e.to_string().replace(',', ";");
            let _ = writeln!(out, "{key}{}{msg}", ",".repeat(15));
            return;
        }
    };
    for e in &summary.estimators {
        let failures = e
            .failures
            .iter()
            .map(|(m, c)| format!("{c}x {m}"))
            .collect::<Vec<_>>()
            .join(" | ")
            .replace(',', ";");
        for f in &e.formulas {
            let _ = writeln!(
                out,
                "{key},{},{},{},{},{:?},{:?},{:?},{:?},{},{},{:?},{},{},{},{}",
                e.estimator.name(),
                f.formula.name(),
                e.replications_used,
                e.n_failed,
                e.empirical_bias,
                e.bias_std_error,
                e.empirical_mse,
                e.empirical_variance,
                opt(f.theoretical_variance),
                opt(f.theoretical_bias),
                f.mean_estimated_variance,
                opt(f.coverage_pct),
                opt(f.mean_amplitude),
                f.n_degenerate,
                failures
            );
        }
    }
}

fn table_rows(cfg: &SimConfig, result: &berkcal::Result<SimSummary>, out: &mut String) {
    let lead = format!("{:>5} {:>4} {:>4} {:>6}", cfg.x0_true, cfg.n, cfg.k, cfg.sigma_delta_sq);
    let summary = match result {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(out, "{lead}  error: {e}");
            return;
        }
    };
    for e in &summary.estimators {
        let _ = write!(
            out,
            "{lead} {:>17} bias {:>8.4} mse {:>7.4} fail {:>4}",
            e.estimator.name(),
            e.empirical_bias,
            e.empirical_mse,
            e.n_failed
        );
        for f in &e.formulas {
            let _ = write!(
                out,
                " | {} V {} meanV {:.4} cov {} A {}",
                f.formula.name(),
                f.theoretical_variance.map_or("-".into(), |v| format!("{v:.4}")),
                f.mean_estimated_variance,
                f.coverage_pct.map_or("-".into(), |v| format!("{v:.2}")),
                f.mean_amplitude.map_or("-".into(), |v| format!("{v:.2}")),
            );
        }
        let _ = writeln!(out);
    }
}

pub fn render(cells: &[SimConfig], results: &[berkcal::Result<SimSummary>], format: SimFormat) -> String {
    let mut out = String::new();
    match format {
        SimFormat::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for (c, r) in cells.iter().zip(results) {
                csv_rows(c, r, &mut out);
            }
        }
        SimFormat::Table => {
            let _ = writeln!(out, "{:>5} {:>4} {:>4} {:>6} {:>17}", "x0", "n", "k", "sd2", "estimator");
            for (c, r) in cells.iter().zip(results) {
                table_rows(c, r, &mut out);
            }
        }
    }
    out
}

pub struct SimulateArgs<'a> {
    pub grid: &'a Path,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub format: SimFormat,
}

/// Runs the grid and renders it. Cells that fail are reported in the
/// output and also returned as the error count.
pub fn simulate_command(args: &SimulateArgs<'_>, out: &mut dyn Write) -> Result<usize> {
    let text = std::fs::read_to_string(args.grid).with_context(|| format!("reading {}", args.grid.display()))?;
    let grid = parse_grid(&text)?;
    let cells = cells(&grid, args.reps, args.seed);
    if cells.is_empty() {
        return Err(UsageError("grid has no cells".into()).into());
    }
    for c in &cells {
        c.validate().map_err(|e| UsageError(format!("cell n={} k={} x0={}: {e}", c.n, c.k, c.x0_true)))?;
    }
    let results = match args.threads {
        Some(t) => run_grid_with_threads(&cells, t)?,
        None => run_grid(&cells),
    };
    out.write_all(render(&cells, &results, args.format).as_bytes())?;
    Ok(results.iter().filter(|r| r.is_err()).count())
}
