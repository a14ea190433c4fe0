//! Standard normal distribution: density, CDF and quantile.

#![allow(clippy::excessive_precision, clippy::unreadable_literal)]

use crate::error::{CalibError, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_677_94;
const SQRT_2PI: f64 = 2.506_628_274_631_000_502_4;

pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF via Cody's rational Chebyshev approximations
/// (relative accuracy near 1e-16 over the whole line).
pub fn std_normal_cdf(x: f64) -> f64 {
    let (lower, _) = cody_cdf(x);
    lower
}

/// Upper tail `1 - Φ(x)` without cancellation.
pub fn std_normal_sf(x: f64) -> f64 {
    let (_, upper) = cody_cdf(x);
    upper
}

const A: [f64; 5] = [
    2.2352520354606839287,
    161.02823106855587881,
    1067.6894854603709582,
    18154.981253343561249,
    0.065682337918207449113,
];
const B: [f64; 4] = [
    47.20258190468824187,
    976.09855173777669322,
    10260.932208618978205,
    45507.789335026729956,
];
const C: [f64; 9] = [
    0.39894151208813466764,
    8.8831497943883759412,
    93.506656132177855979,
    597.27027639480026226,
    2494.5375852903726711,
    6848.1904505362823326,
    11602.651437647350124,
    9842.7148383839780218,
    1.0765576773720192317e-8,
];
const D: [f64; 8] = [
    22.266688044328115691,
    235.38790178262499861,
    1519.377599407554805,
    6485.558298266760755,
    18615.571640885098091,
    34900.952721145977266,
    38912.003286093271411,
    19685.429676859990727,
];
const P: [f64; 6] = [
    0.21589853405795699,
    0.1274011611602473639,
    0.022235277870649807,
    0.001421619193227893466,
    2.9112874951168792e-5,
    0.02307344176494017303,
];
const Q: [f64; 5] = [
    1.28426009614491121,
    0.468238212480865118,
    0.0659881378689285515,
    0.00378239633202758244,
    7.29751555083966205e-5,
];

/// Returns `(Φ(x), 1 - Φ(x))`.
fn cody_cdf(x: f64) -> (f64, f64) {
    if x.is_nan() {
        return (f64::NAN, f64::NAN);
    }
    let y = x.abs();
    if y <= 0.67448975 {
        let (mut num, mut den) = (0.0, 0.0);
        if y > f64::EPSILON * 0.5 {
            let xsq = x * x;
            num = A[4] * xsq;
            den = xsq;
            for i in 0..3 {
                num = (num + A[i]) * xsq;
                den = (den + B[i]) * xsq;
            }
        }
        let temp = x * (num + A[3]) / (den + B[3]);
        return (0.5 + temp, 0.5 - temp);
    }

    let tail = if y <= 32f64.sqrt() {
        let mut num = C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        let temp = (num + C[7]) / (den + D[7]);
        split_exp(y) * temp
    } else if y < 40.0 {
        let xsq = 1.0 / (x * x);
        let mut num = P[5] * xsq;
        let mut den = xsq;
        for i in 0..4 {
            num = (num + P[i]) * xsq;
            den = (den + Q[i]) * xsq;
        }
        let temp = xsq * (num + P[4]) / (den + Q[4]);
        let temp = (FRAC_1_SQRT_2PI - temp) / y;
        split_exp(y) * temp
    } else {
        0.0
    };

    if x > 0.0 {
        (1.0 - tail, tail)
    } else {
        (tail, 1.0 - tail)
    }
}

/// `exp(-y²/2)` evaluated in two pieces to avoid losing bits in `y²`.
fn split_exp(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq * 0.5).exp() * (-del * 0.5).exp()
}

const ACKLAM_A: [f64; 6] = [
    -3.969683028665376e1,
    2.209460984245205e2,
    -2.759285104469687e2,
    1.383577518672690e2,
    -3.066479806614716e1,
    2.506628277459239,
];
const ACKLAM_B: [f64; 5] = [
    -5.447609879822406e1,
    1.615858368580409e2,
    -1.556989798598866e2,
    6.680131188771972e1,
    -1.328068155288572e1,
];
const ACKLAM_C: [f64; 6] = [
    -7.784894002430293e-3,
    -3.223964580411365e-1,
    -2.400758277161838,
    -2.549732539343734,
    4.374664141464968,
    2.938163982698783,
];
const ACKLAM_D: [f64; 4] = [
    7.784695709041462e-3,
    3.224671290700398e-1,
    2.445134137142996,
    3.754408661907416,
];

/// Standard normal quantile `Φ⁻¹(p)`.
///
/// Acklam's rational approximation (relative error about 1e-9) followed by
/// one Halley correction against [`std_normal_cdf`].
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(CalibError::InvalidLevel(p));
    }
    const P_LOW: f64 = 0.02425;
    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        tail_ratio(q)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        let a = &ACKLAM_A;
        let b = &ACKLAM_B;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -tail_ratio(q)
    };

    // Work in the smaller tail so the correction keeps full relative accuracy.
    let e = if x < 0.0 {
        std_normal_cdf(x) - p
    } else {
        (1.0 - p) - std_normal_sf(x)
    };
    let u = e * SQRT_2PI * (0.5 * x * x).exp();
    Ok(x - u / (1.0 + 0.5 * x * u))
}

fn tail_ratio(q: f64) -> f64 {
    let c = &ACKLAM_C;
    let d = &ACKLAM_D;
    (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
        / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
}

/// Two-sided critical value `z` with `P(|Z| <= z) = level`.
pub fn two_sided_z(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(CalibError::InvalidLevel(level));
    }
    std_normal_quantile(1.0 - (1.0 - level) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from mpmath at 30 digits:
    //   ncdf(x) for x in the list, and the 0.975 / 0.995 quantiles.
    const CDF_REFERENCE: [(f64, f64); 9] = [
        (-8.0, 6.2209605742717841235e-16),
        (-5.0, 2.8665157187919391167e-7),
        (-2.5, 0.0062096653257761351670),
        (-1.0, 0.15865525393145705141),
        (-0.3, 0.38208857781104736693),
        (0.0, 0.5),
        (0.6, 0.72574688224992641231),
        (1.234, 0.89139854787847571577),
        (3.0, 0.99865010196836990547),
    ];

    #[test]
    fn cdf_matches_reference() {
        for (x, want) in CDF_REFERENCE {
            let got = std_normal_cdf(x);
            assert!(
                ((got - want) / want).abs() < 1e-13,
                "cdf({x}) = {got:e}, want {want:e}"
            );
        }
    }

    #[test]
    fn cdf_at_zero_is_half() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
    }

    #[test]
    fn quantile_975() {
        let z = std_normal_quantile(0.975).unwrap();
        assert!((z - 1.959963984540054).abs() < 1e-12, "{z}");
        let z99 = two_sided_z(0.99).unwrap();
        assert!((z99 - 2.5758293035489008).abs() < 1e-12, "{z99}");
    }

    #[test]
    fn quantile_inverts_cdf() {
        let x = std_normal_quantile(std_normal_cdf(1.234)).unwrap();
        assert!((x - 1.234).abs() < 1e-9);
        let mut p = 1e-6;
        while p < 1.0 - 1e-6 {
            let x = std_normal_quantile(p).unwrap();
            assert!((std_normal_cdf(x) - p).abs() < 1e-9, "p = {p}");
            p += 1.0 / 997.0;
        }
        for p in [1e-6, 1e-5, 1.0 - 1e-5, 1.0 - 1e-6] {
            let x = std_normal_quantile(p).unwrap();
            assert!((std_normal_cdf(x) - p).abs() < 1e-9 * p.max(1e-3), "p = {p}");
        }
    }

    #[test]
    fn quantile_rejects_out_of_range() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(std_normal_quantile(p), Err(CalibError::InvalidLevel(_))));
        }
    }

    #[test]
    fn quantile_against_quadrature() {
        // Independent oracle: integrate the density with composite Simpson.
        fn cdf_by_quadrature(x: f64) -> f64 {
            let steps = 20_000;
            let h = x / steps as f64;
            let mut acc = std_normal_pdf(0.0) + std_normal_pdf(x);
            for i in 1..steps {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * std_normal_pdf(i as f64 * h);
            }
            0.5 + acc * h / 3.0
        }
        for p in [0.6, 0.8, 0.9, 0.975, 0.995, 0.9999] {
            let z = std_normal_quantile(p).unwrap();
            assert!((cdf_by_quadrature(z) - p).abs() < 1e-11, "p = {p}");
        }
    }
}
