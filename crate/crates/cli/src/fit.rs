//! The `fit` command: estimates and uncertainty for one unknown sample.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Result};
use berkcal::{
    fit_known_delta, fit_unknown_delta, fit_usual, CalibrationData, ModelParams, SolverConfig, UncertaintyReport,
    VarianceFormula,
};
use clap::ValueEnum;
use serde::Serialize;

use crate::ingest::{ingest, Locale};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    /// Usual model.
    Usual,
    /// Controlled model, `sigma_delta²` estimated.
    Unknown,
    /// Controlled model, `sigma_delta²` supplied.
    Known,
}

impl ModelChoice {
    pub fn name(self) -> &'static str {
        match self {
            ModelChoice::Usual => "usual",
            ModelChoice::Unknown => "unknown",
            ModelChoice::Known => "known",
        }
    }

    /// Formula used for the reported interval.
    pub fn primary_formula(self) -> VarianceFormula {
        match self {
            ModelChoice::Usual => VarianceFormula::V1Usual,
            ModelChoice::Unknown => VarianceFormula::V1Controlled,
            ModelChoice::Known => VarianceFormula::VKnownDelta,
        }
    }

    fn formulas(self) -> &'static [VarianceFormula] {
        match self {
            ModelChoice::Usual => &[VarianceFormula::V1Usual, VarianceFormula::V2Usual],
            ModelChoice::Unknown => &[VarianceFormula::V1Controlled, VarianceFormula::V2Controlled],
            ModelChoice::Known => &[VarianceFormula::VKnownDelta],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    /// One JSON object per line.
    Json,
    /// Quantities by model, three significant figures.
    Table,
}

/// Everything a `fit` run depends on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitManifest {
    pub first: PathBuf,
    pub second: PathBuf,
    /// Empty means every model that the inputs allow.
    pub models: Vec<ModelChoice>,
    pub sigma_delta_sq: Option<f64>,
    pub confidence_level: f64,
    pub locale: Locale,
    pub format: OutputFormat,
    pub output: Option<PathBuf>,
}

impl FitManifest {
    pub fn validate(&self) -> Result<()> {
        if let Some(d) = self.sigma_delta_sq {
            if !(d >= 0.0 && d.is_finite()) {
                bail!(crate::UsageError(format!("--sigma-delta-sq must be finite and >= 0, got {d}")));
            }
        }
        if self.models.contains(&ModelChoice::Known) && self.sigma_delta_sq.is_none() {
            bail!(crate::UsageError("--model known requires --sigma-delta-sq".into()));
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            bail!(crate::UsageError(format!("--level must be in (0, 1), got {}", self.confidence_level)));
        }
        Ok(())
    }

    pub fn resolved_models(&self) -> Vec<ModelChoice> {
        if !self.models.is_empty() {
            let mut m = self.models.clone();
            m.sort();
            m.dedup();
            return m;
        }
        let mut m = vec![ModelChoice::Usual, ModelChoice::Unknown];
        if self.sigma_delta_sq.is_some() {
            m.push(ModelChoice::Known);
        }
        m
    }
}

/// One reported number.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub model: &'static str,
    pub quantity: String,
    pub value: f64,
}

fn row(model: ModelChoice, quantity: impl Into<String>, value: f64) -> ReportRow {
    ReportRow {
        model: model.name(),
        quantity: quantity.into(),
        value,
    }
}

/// Fits one model and lists its estimates, variances and interval.
pub fn model_rows(
    model: ModelChoice,
    data: &CalibrationData,
    sigma_delta_sq: Option<f64>,
    level: f64,
) -> Result<Vec<ReportRow>> {
    let stats = data.summarize();
    let design = stats.design();
    let mut rows = Vec::new();
    let params: ModelParams = match model {
        ModelChoice::Usual => fit_usual(&stats)?.params(),
        ModelChoice::Unknown => {
            let f = fit_unknown_delta(&stats)?;
            rows.push(row(model, "sigma_delta_sq", f.sigma_delta_sq_hat));
            rows.push(row(model, "negative_delta_variance", f.negative_delta_variance as u8 as f64));
            f.params()
        }
        ModelChoice::Known => {
            let d = sigma_delta_sq.expect("validated manifest");
            let f = fit_known_delta(&stats, d, &SolverConfig::default())?;
            if let Some(s) = f.solver {
                rows.push(row(model, "solver_iterations", s.iterations as f64));
                rows.push(row(model, "solver_scaled_residual", s.scaled_residual));
            }
            f.params()
        }
    };
    let mut head = vec![
        row(model, "alpha", params.alpha),
        row(model, "beta", params.beta),
        row(model, "x0", params.x0),
        row(model, "sigma_eps_sq", params.sigma_eps_sq),
        row(model, "gamma", params.gamma()),
    ];
    head.append(&mut rows);
    let mut rows = head;

    for &f in model.formulas() {
        rows.push(row(model, f.name(), f.variance(&params, &design)?));
        rows.push(row(model, format!("bias_{}", f.name()), f.bias(&params, &design)?));
    }
    let report = UncertaintyReport::new(model.primary_formula(), &params, &design, level)?;
    rows.push(row(model, "variance", report.variance));
    rows.push(row(model, "ci_lower", report.ci_lower));
    rows.push(row(model, "ci_upper", report.ci_upper));
    rows.push(row(model, "amplitude", report.amplitude()));
    rows.push(row(model, "half_width", report.half_width()));
    Ok(rows)
}

pub fn fit_rows(manifest: &FitManifest) -> Result<Vec<ReportRow>> {
    manifest.validate()?;
    let data = ingest(&manifest.first, &manifest.second, manifest.locale)?;
    let mut rows = Vec::new();
    for model in manifest.resolved_models() {
        rows.extend(model_rows(model, &data, manifest.sigma_delta_sq, manifest.confidence_level)?);
    }
    Ok(rows)
}

/// Three significant figures in scientific notation, as in printed tables.
pub fn three_sig(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v:.2e}")
    }
}

pub fn write_rows(rows: &[ReportRow], format: OutputFormat, out: &mut dyn Write) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            writeln!(out, "model,quantity,value")?;
            for r in rows {
                writeln!(out, "{},{},{:?}", r.model, r.quantity, r.value)?;
            }
        }
        OutputFormat::Json => {
            for r in rows {
                writeln!(out, "{}", serde_json::to_string(r)?)?;
            }
        }
        OutputFormat::Table => {
            let mut models: Vec<&str> = Vec::new();
            let mut quantities: Vec<&str> = Vec::new();
            for r in rows {
                if !models.contains(&r.model) {
                    models.push(r.model);
                }
                if !quantities.contains(&r.quantity.as_str()) {
                    quantities.push(&r.quantity);
                }
            }
            let width = quantities.iter().map(|q| q.len()).max().unwrap_or(8).max(8);
            write!(out, "{:width$}", "quantity")?;
            for m in &models {
                write!(out, "  {m:>10}")?;
            }
            writeln!(out)?;
            for q in &quantities {
                write!(out, "{q:width$}")?;
                for m in &models {
                    let cell = rows
                        .iter()
                        .find(|r| r.model == *m && r.quantity == *q)
                        .map_or_else(|| "-".to_string(), |r| three_sig(r.value));
                    write!(out, "  {cell:>10}")?;
                }
                writeln!(out)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_data() -> CalibrationData {
        CalibrationData::new(
            vec![(0.0, 0.12), (0.5, 1.05), (1.0, 2.11), (1.5, 3.02), (2.0, 4.13)],
            vec![1.71, 1.66, 1.75],
        )
        .unwrap()
    }

    fn value(rows: &[ReportRow], model: &str, q: &str) -> f64 {
        rows.iter().find(|r| r.model == model && r.quantity == q).unwrap().value
    }

    #[test]
    fn usual_and_unknown_share_point_estimates() {
        let d = line_data();
        let u = model_rows(ModelChoice::Usual, &d, None, 0.95).unwrap();
        let c = model_rows(ModelChoice::Unknown, &d, None, 0.95).unwrap();
        for q in ["alpha", "beta", "x0"] {
            assert_eq!(value(&u, "usual", q), value(&c, "unknown", q));
        }
    }

    #[test]
    fn amplitude_is_twice_half_width() {
        let rows = model_rows(ModelChoice::Known, &line_data(), Some(0.001), 0.99).unwrap();
        let a = value(&rows, "known", "amplitude");
        let h = value(&rows, "known", "half_width");
        assert!((a - 2.0 * h).abs() < 1e-15);
        let v = value(&rows, "known", "variance");
        assert!((h - 2.5758293035489 * v.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn known_model_needs_sigma() {
        let m = FitManifest {
            first: "a".into(),
            second: "b".into(),
            models: vec![ModelChoice::Known],
            sigma_delta_sq: None,
            confidence_level: 0.95,
            locale: Locale::Point,
            format: OutputFormat::Csv,
            output: None,
        };
        assert!(m.validate().unwrap_err().downcast_ref::<crate::UsageError>().is_some());
        let all = FitManifest { models: vec![], ..m.clone() };
        assert_eq!(all.resolved_models(), vec![ModelChoice::Usual, ModelChoice::Unknown]);
        let with = FitManifest { models: vec![], sigma_delta_sq: Some(0.1), ..m };
        assert_eq!(with.resolved_models().len(), 3);
    }

    #[test]
    fn csv_round_trips_full_precision() {
        let rows = model_rows(ModelChoice::Usual, &line_data(), None, 0.95).unwrap();
        let mut buf = Vec::new();
        write_rows(&rows, OutputFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for (line, r) in text.lines().skip(1).zip(&rows) {
            let v: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
            assert_eq!(v, r.value);
        }
    }

    #[test]
    fn table_uses_three_significant_figures() {
        assert_eq!(three_sig(123003.7), "1.23e5");
        assert_eq!(three_sig(9.8049e-7), "9.80e-7");
    }
}
