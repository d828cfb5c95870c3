//! Integrals of the conditional survival function.
//!
//! Two routes are provided. [`trapezoid_over_knots`] is the established
//! trapezoidal rule over the observed knots, which stops at the largest knot.
//! [`integrate_survival`] integrates the step region exactly as rectangles and
//! hands the region past `x_tilde` to the tail extension, so the upper bound
//! can be infinite.

pub mod gauss_kronrod;

use serde::{Deserialize, Serialize};

use crate::baseline::BaselineSurvival;
use crate::curve::SurvivalCurve;
use crate::error::Result;
pub use gauss_kronrod::{integrate, Quadrature, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegrationMethod {
    TrapezoidKnots,
    ExactStepPlusTail,
    ExactStepPlusAdaptiveTail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub method: IntegrationMethod,
    pub subdivisions: usize,
}

impl IntegralResult {
    fn exact(value: f64, method: IntegrationMethod) -> Self {
        Self {
            value,
            abs_error_estimate: 0.0,
            method,
            subdivisions: 0,
        }
    }
}

/// Trapezoidal rule over consecutive knots `k_j >= from`, with heights
/// `S0(k_j)^exponent`. Nothing past the last knot is counted.
pub fn trapezoid_over_knots(baseline: &BaselineSurvival, exponent: f64, from: f64) -> IntegralResult {
    let powered: Vec<f64> = baseline.heights().iter().map(|h| h.powf(exponent)).collect();
    trapezoid_over_heights(baseline.knots(), &powered, from)
}

/// Trapezoidal rule over arbitrary per-knot heights.
pub fn trapezoid_over_heights(knots: &[f64], heights: &[f64], from: f64) -> IntegralResult {
    debug_assert_eq!(knots.len(), heights.len());
    let start = knots.partition_point(|&k| k < from);
    let value = knots[start.min(knots.len())..]
        .windows(2)
        .zip(heights[start.min(heights.len())..].windows(2))
        .map(|(k, h)| 0.5 * (h[0] + h[1]) * (k[1] - k[0]))
        .sum();
    IntegralResult::exact(value, IntegrationMethod::TrapezoidKnots)
}

/// Exact integral of the step baseline raised to `exponent` over
/// `[from, to]`, both at most `x_tilde`.
pub fn step_integral(baseline: &BaselineSurvival, exponent: f64, from: f64, to: f64) -> f64 {
    let knots = baseline.knots();
    let heights = baseline.heights();
    let mut a = from;
    let mut idx = baseline.knot_index(a);
    let mut total = 0.0;
    while a < to {
        let (h, next) = match idx {
            Some(k) => (heights[k], knots.get(k + 1).copied().unwrap_or(f64::INFINITY)),
            None => (1.0, knots[0]),
        };
        let b = next.min(to);
        total += h.powf(exponent) * (b - a);
        a = b;
        idx = Some(idx.map_or(0, |k| k + 1));
    }
    total
}

/// `∫_from^upper S(x | z) dx` with `upper = curve.upper_cap` or infinity.
pub fn integrate_survival(curve: &SurvivalCurve, z: &[f64], from: f64) -> Result<IntegralResult> {
    let e = curve.exponent(z)?;
    let upper = curve.upper_cap.unwrap_or(f64::INFINITY);
    if from >= upper {
        return Ok(IntegralResult::exact(0.0, IntegrationMethod::ExactStepPlusTail));
    }
    let x_tilde = curve.baseline.x_tilde();
    let step = step_integral(&curve.baseline, e, from, x_tilde.min(upper));
    let tail = curve
        .extension
        .tail_integral(from.max(x_tilde), e, curve.upper_cap)?;
    Ok(IntegralResult::exact(step + tail, IntegrationMethod::ExactStepPlusTail))
}

/// As [`integrate_survival`], with the tail done by adaptive Gauss-Kronrod
/// quadrature instead of its closed form.
pub fn integrate_survival_adaptive(
    curve: &SurvivalCurve,
    z: &[f64],
    from: f64,
    tol: Tolerance,
) -> Result<IntegralResult> {
    let e = curve.exponent(z)?;
    let upper = curve.upper_cap.unwrap_or(f64::INFINITY);
    if from >= upper {
        return Ok(IntegralResult::exact(0.0, IntegrationMethod::ExactStepPlusAdaptiveTail));
    }
    let x_tilde = curve.baseline.x_tilde();
    let step = step_integral(&curve.baseline, e, from, x_tilde.min(upper));
    let q = curve
        .extension
        .tail_integral_adaptive(from.max(x_tilde), e, curve.upper_cap, tol)?;
    Ok(IntegralResult {
        value: step + q.value,
        abs_error_estimate: q.abs_error,
        method: IntegrationMethod::ExactStepPlusAdaptiveTail,
        subdivisions: q.subdivisions,
    })
}
