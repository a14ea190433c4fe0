//! Two-stage calibration data and its sufficient statistics.
//!
//! All first-stage centered moments use divisor `n` and the second-stage
//! dispersion uses divisor `k`; the closed-form estimators depend on this
//! convention.

use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};

/// First-stage standards `(x, y)` and second-stage readings `y0` of one
/// unknown sample. Construction validates the data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationData {
    first_stage: Vec<(f64, f64)>,
    second_stage: Vec<f64>,
}

impl CalibrationData {
    pub fn new(first_stage: Vec<(f64, f64)>, second_stage: Vec<f64>) -> Result<Self> {
        validate(Self {
            first_stage,
            second_stage,
        })
    }

    pub fn first_stage(&self) -> &[(f64, f64)] {
        &self.first_stage
    }

    pub fn second_stage(&self) -> &[f64] {
        &self.second_stage
    }

    pub fn n(&self) -> usize {
        self.first_stage.len()
    }

    pub fn k(&self) -> usize {
        self.second_stage.len()
    }

    pub fn summarize(&self) -> SufficientStats {
        summarize(self)
    }

    pub(crate) fn from_parts_unchecked(first_stage: Vec<(f64, f64)>, second_stage: Vec<f64>) -> Self {
        Self {
            first_stage,
            second_stage,
        }
    }
}

/// Checks every data invariant and hands the data back unchanged.
pub fn validate(raw: CalibrationData) -> Result<CalibrationData> {
    for (index, &(x, y)) in raw.first_stage.iter().enumerate() {
        if !x.is_finite() || !y.is_finite() {
            return Err(CalibError::NonFinite {
                stage: "first stage",
                index,
            });
        }
    }
    if let Some(index) = raw.second_stage.iter().position(|v| !v.is_finite()) {
        return Err(CalibError::NonFinite {
            stage: "second stage",
            index,
        });
    }
    let (n, k) = (raw.first_stage.len(), raw.second_stage.len());
    if n < 3 || k < 2 {
        return Err(CalibError::TooFewPoints { n, k });
    }
    let x0 = raw.first_stage[0].0;
    if raw.first_stage.iter().all(|&(x, _)| x == x0) {
        return Err(CalibError::DegenerateDesign);
    }
    Ok(raw)
}

/// Means and centered second moments of both stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    pub n: usize,
    pub k: usize,
    pub x_bar: f64,
    pub y_bar: f64,
    pub s_xx: f64,
    pub s_xy: f64,
    pub s_yy: f64,
    pub sum_x_sq: f64,
    pub y0_bar: f64,
    pub s_y0y0: f64,
}

impl SufficientStats {
    pub fn design(&self) -> Design {
        Design {
            n: self.n,
            k: self.k,
            x_bar: self.x_bar,
            s_xx: self.s_xx,
            sum_x_sq: self.sum_x_sq,
        }
    }

    /// Mean squared first-stage residual `S_YY - 2 b S_XY + b² S_XX` about
    /// the line with slope `b` through the centroid.
    pub fn residual_mean_square(&self, slope: f64) -> f64 {
        (self.s_yy - 2.0 * slope * self.s_xy + slope * slope * self.s_xx).max(0.0)
    }
}

pub fn summarize(data: &CalibrationData) -> SufficientStats {
    let n = data.first_stage.len();
    let k = data.second_stage.len();
    let nf = n as f64;
    let kf = k as f64;

    let x_bar = data.first_stage.iter().map(|p| p.0).sum::<f64>() / nf;
    let y_bar = data.first_stage.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy, mut sum_x_sq) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in &data.first_stage {
        let dx = x - x_bar;
        let dy = y - y_bar;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
        sum_x_sq += x * x;
    }

    let y0_bar = data.second_stage.iter().sum::<f64>() / kf;
    let s_y0y0 = data
        .second_stage
        .iter()
        .map(|v| (v - y0_bar) * (v - y0_bar))
        .sum::<f64>()
        / kf;

    SufficientStats {
        n,
        k,
        x_bar,
        y_bar,
        s_xx: sxx / nf,
        s_xy: sxy / nf,
        s_yy: syy / nf,
        sum_x_sq,
        y0_bar,
        s_y0y0,
    }
}

/// The first-stage design summary and second-stage size that every variance
/// and information formula needs, independent of the responses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub n: usize,
    pub k: usize,
    pub x_bar: f64,
    pub s_xx: f64,
    pub sum_x_sq: f64,
}

impl Design {
    pub fn from_x(x: &[f64], k: usize) -> Self {
        let n = x.len();
        let x_bar = x.iter().sum::<f64>() / n as f64;
        let s_xx = x.iter().map(|v| (v - x_bar) * (v - x_bar)).sum::<f64>() / n as f64;
        Self {
            n,
            k,
            x_bar,
            s_xx,
            sum_x_sq: x.iter().map(|v| v * v).sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn chromium_sample_a() -> CalibrationData {
        CalibrationData::new(
            vec![
                (0.05, 6455.900),
                (0.11, 13042.933),
                (0.26, 32621.733),
                (0.79, 97364.500),
                (1.05, 129178.100),
            ],
            vec![1465.0, 1351.0, 1495.6],
        )
        .unwrap()
    }

    #[test]
    fn application_data_accepted() {
        let data = chromium_sample_a();
        assert_eq!((data.n(), data.k()), (5, 3));
    }

    #[test]
    fn application_means() {
        let s = chromium_sample_a().summarize();
        assert!((s.x_bar - 0.452).abs() < 1e-15);
        assert!((s.y_bar - 55732.6332).abs() < 1e-9);
        assert!((s.y0_bar - 1437.2).abs() < 1e-10);
    }

    #[test]
    fn perfect_line_moments() {
        let data = CalibrationData::new(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)], vec![1.0, 1.0]).unwrap();
        let s = data.summarize();
        for v in [s.s_xx, s.s_xy, s.s_yy] {
            assert!((v - 2.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(s.s_y0y0, 0.0);
        assert_eq!(s.sum_x_sq, 5.0);
    }

    #[test]
    fn degenerate_design_rejected() {
        let err = CalibrationData::new(vec![(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)], vec![1.0, 2.0]).unwrap_err();
        assert_eq!(err, CalibError::DegenerateDesign);
    }

    #[test]
    fn too_few_points_rejected() {
        let first = vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)];
        assert_eq!(
            CalibrationData::new(first.clone(), vec![1.0]).unwrap_err(),
            CalibError::TooFewPoints { n: 3, k: 1 }
        );
        assert_eq!(
            CalibrationData::new(first[..2].to_vec(), vec![1.0, 2.0]).unwrap_err(),
            CalibError::TooFewPoints { n: 2, k: 2 }
        );
    }

    #[test]
    fn non_finite_rejected() {
        let err = CalibrationData::new(vec![(0.0, 0.0), (1.0, f64::NAN), (2.0, 2.0)], vec![1.0, 2.0]).unwrap_err();
        assert_eq!(
            err,
            CalibError::NonFinite {
                stage: "first stage",
                index: 1
            }
        );
        let err = CalibrationData::new(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)], vec![1.0, f64::INFINITY]).unwrap_err();
        assert!(matches!(err, CalibError::NonFinite { stage: "second stage", index: 1 }));
    }

    #[test]
    fn design_matches_summary() {
        let data = chromium_sample_a();
        let xs: Vec<f64> = data.first_stage().iter().map(|p| p.0).collect();
        let d = Design::from_x(&xs, data.k());
        assert_eq!(d, data.summarize().design());
    }

    fn dataset() -> impl Strategy<Value = (Vec<(f64, f64)>, Vec<f64>)> {
        (
            prop::collection::vec((-1e3..1e3f64, -1e5..1e5f64), 3..30),
            prop::collection::vec(-1e5..1e5f64, 2..10),
        )
            .prop_filter("spread in x", |(first, _)| {
                first.iter().any(|p| (p.0 - first[0].0).abs() > 1e-3)
            })
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    proptest! {
        #[test]
        fn permutation_invariant((first, second) in dataset(), rot in 0usize..30) {
            let s1 = CalibrationData::new(first.clone(), second.clone()).unwrap().summarize();
            let mut f2 = first.clone();
            let r = rot % f2.len();
            f2.rotate_left(r);
            f2.reverse();
            let mut s2v = second.clone();
            s2v.reverse();
            let s2 = CalibrationData::new(f2, s2v).unwrap().summarize();
            for (a, b) in [(s1.x_bar, s2.x_bar), (s1.y_bar, s2.y_bar), (s1.s_xx, s2.s_xx),
                           (s1.s_xy, s2.s_xy), (s1.s_yy, s2.s_yy), (s1.sum_x_sq, s2.sum_x_sq),
                           (s1.y0_bar, s2.y0_bar), (s1.s_y0y0, s2.s_y0y0)] {
                prop_assert!((a - b).abs() <= 1e-9 * (a.abs() + b.abs() + 1.0));
            }
        }

        #[test]
        fn affine_equivariant((first, second) in dataset(), a in 0.1..10.0f64, b in -100.0..100.0f64) {
            let s = CalibrationData::new(first.clone(), second.clone()).unwrap().summarize();
            let mapped: Vec<(f64, f64)> = first.iter().map(|&(x, y)| (x, a * y + b)).collect();
            let t = CalibrationData::new(mapped, second).unwrap().summarize();
            prop_assert!(rel_close(t.s_xy, a * s.s_xy, 1e-12) || (t.s_xy - a * s.s_xy).abs() < 1e-9 * a * s.s_xx.sqrt() * s.s_yy.sqrt());
            prop_assert!(rel_close(t.s_yy, a * a * s.s_yy, 1e-12));
            prop_assert!(rel_close(t.y_bar, a * s.y_bar + b, 1e-12) || (t.y_bar - (a * s.y_bar + b)).abs() < 1e-9 * (a * s.s_yy.sqrt() + b.abs()));
        }

        #[test]
        fn cauchy_schwarz((first, second) in dataset()) {
            let s = CalibrationData::new(first, second).unwrap().summarize();
            prop_assert!(s.s_xx > 0.0 && s.s_yy >= 0.0 && s.s_y0y0 >= 0.0);
            prop_assert!(s.s_xy * s.s_xy <= s.s_xx * s.s_yy * (1.0 + 1e-12));
            prop_assert!(s.sum_x_sq >= s.n as f64 * s.x_bar * s.x_bar);
        }
    }
}
