//! Rayleigh test of circular uniformity for z-scores in `[0, 1)`.

use std::f64::consts::TAU;

use crate::error::{invalid_input, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayleighResult {
    /// `R̄ = |mean(e^{2πi z})|`.
    pub mean_resultant: f64,
    /// `Z = m·R̄²`.
    pub statistic: f64,
    /// Approximate p-value, clamped to `[0, 1]`.
    pub p_value: f64,
    /// Natural log of the unclamped approximation. Keeps its magnitude after
    /// `p_value` underflows; `−∞` when the correction series goes negative.
    pub log_p: f64,
}

/// Largest `Z` evaluated on the linear scale; `e^{−700}` is near the `f64`
/// underflow boundary.
const LINEAR_LIMIT: f64 = 700.0;

/// Rayleigh test with the two-term small-sample correction
///
/// `p = e^{−Z} [1 + (2Z − Z²)/(4m) − (24Z − 132Z² + 76Z³ − 9Z⁴)/(288m²)]`.
pub fn rayleigh_test(z: &[f64]) -> Result<RayleighResult> {
    let m = z.len();
    if m < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: m });
    }
    let (mut c, mut s) = (0.0f64, 0.0f64);
    for &v in z {
        if !v.is_finite() {
            return Err(invalid_input(format!("non-finite z-score {v}")));
        }
        let (sin, cos) = (TAU * v).sin_cos();
        c += cos;
        s += sin;
    }
    let mf = m as f64;
    let mean_resultant = (c.hypot(s) / mf).min(1.0);
    let zs = mf * mean_resultant * mean_resultant;

    let z2 = zs * zs;
    let correction = 1.0 + (2.0 * zs - z2) / (4.0 * mf)
        - (24.0 * zs - 132.0 * z2 + 76.0 * z2 * zs - 9.0 * z2 * z2) / (288.0 * mf * mf);

    let log_p = if correction > 0.0 {
        -zs + correction.ln()
    } else {
        f64::NEG_INFINITY
    };
    let p_value = if zs > LINEAR_LIMIT {
        log_p.exp().clamp(0.0, 1.0)
    } else {
        ((-zs).exp() * correction).clamp(0.0, 1.0)
    };
    Ok(RayleighResult {
        mean_resultant,
        statistic: zs,
        p_value,
        log_p,
    })
}
