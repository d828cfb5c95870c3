//! Conditional mean imputation of a right-censored covariate:
//! `E(X | X > w, z) = w + ∫_w^∞ S(x | z) dx / S(w | z)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{breslow_baseline, Interpolation};
use crate::cox::{fit_cox, CoxFit, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::curve::SurvivalCurve;
use crate::data::{dot, validate_records, CensoredRecord};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_survival, trapezoid_over_heights};
use crate::tail::{fit_extension_with_fallback, ExtensionKind, TailExtension};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Approach {
    /// Step baseline spliced with a tail extension, integrated to the cap or
    /// to infinity.
    #[default]
    Extrapolated,
    /// Trapezoidal rule over the observed knots, stopping at the largest.
    NonExtrapolated,
}

/// Which covariates set the trapezoid heights in the non-extrapolated
/// approach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrapezoidHeights {
    /// `S(W_(j) | z_i)`: every knot evaluated at the imputed subject's covariates.
    #[default]
    Subject,
    /// `S(W_(j) | z_(j))`: each knot evaluated at the covariates of the
    /// subject(s) observed there, averaged over ties.
    KnotOwner,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputationConfig {
    pub approach: Approach,
    pub extension: ExtensionKind,
    pub interpolation: Interpolation,
    pub upper_cap: Option<f64>,
    /// Treat the largest observed `w` as an event. `None` resolves to `true`
    /// for the non-extrapolated approach without covariates, else `false`.
    pub treat_max_as_event: Option<bool>,
    pub trapezoid_heights: TrapezoidHeights,
    pub cox_tol: f64,
    pub cox_max_iter: usize,
}

impl Default for ImputationConfig {
    fn default() -> Self {
        Self {
            approach: Approach::Extrapolated,
            extension: ExtensionKind::Weibull,
            interpolation: Interpolation::CarryForward,
            upper_cap: None,
            treat_max_as_event: None,
            trapezoid_heights: TrapezoidHeights::Subject,
            cox_tol: DEFAULT_TOL,
            cox_max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl ImputationConfig {
    pub fn extrapolated(extension: ExtensionKind) -> Self {
        Self {
            approach: Approach::Extrapolated,
            extension,
            ..Self::default()
        }
    }

    pub fn non_extrapolated() -> Self {
        Self {
            approach: Approach::NonExtrapolated,
            ..Self::default()
        }
    }

    pub fn resolve_treat_max_as_event(&self, p: usize) -> bool {
        self.treat_max_as_event
            .unwrap_or(self.approach == Approach::NonExtrapolated && p == 0)
    }
}

/// Pieces of one conditional mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalMean {
    pub value: f64,
    pub survival_at_w: f64,
    pub integral: f64,
}

/// Conditional mean for one subject. Under the non-extrapolated approach the
/// integral is the trapezoidal rule with [`TrapezoidHeights::Subject`] and
/// the denominator is the step baseline at `w`.
pub fn conditional_mean(curve: &SurvivalCurve, w: f64, z: &[f64], config: &ImputationConfig) -> Result<f64> {
    conditional_mean_parts(curve, w, z, config, None).map(|c| c.value)
}

/// As [`conditional_mean`], returning the survival and integral as well.
/// `owner_heights` (already on the survival scale) replaces the subject
/// heights in the trapezoidal rule when given.
pub fn conditional_mean_parts(
    curve: &SurvivalCurve,
    w: f64,
    z: &[f64],
    config: &ImputationConfig,
    owner_heights: Option<&[f64]>,
) -> Result<ConditionalMean> {
    if !(w >= 0.0 && w.is_finite()) {
        return Err(Error::InvalidArgument(format!("w = {w} must be finite and non-negative")));
    }
    let e = curve.exponent(z)?;
    let (survival_at_w, integral) = match config.approach {
        Approach::Extrapolated if w > curve.baseline.x_tilde() => {
            let ratio = curve.extension.residual_mean(w, e, curve.upper_cap)?;
            let s = curve.baseline_value(w).powf(e);
            let mut value = w + ratio;
            if let Some(cap) = curve.upper_cap {
                value = value.min(cap.max(w));
            }
            return Ok(ConditionalMean {
                value,
                survival_at_w: s,
                integral: ratio * s,
            });
        }
        Approach::Extrapolated => {
            let s = curve.baseline_value(w).powf(e);
            if s <= 0.0 {
                return Err(Error::ZeroSurvival { w });
            }
            (s, integrate_survival(curve, z, w)?.value)
        }
        Approach::NonExtrapolated => {
            let b = &curve.baseline;
            let s = b.step_value(w).powf(e);
            if s <= 0.0 {
                return Err(Error::ZeroSurvival { w });
            }
            let mut heights: Vec<f64> = match owner_heights {
                Some(h) => h.to_vec(),
                None => b.heights().iter().map(|v| v.powf(e)).collect(),
            };
            let mut knots = b.knots().to_vec();
            if let Some(cap) = curve.upper_cap {
                // cut the segment straddling the cap at a linearly
                // interpolated height
                let n = knots.partition_point(|&k| k <= cap);
                if n > 0 && n < knots.len() && knots[n - 1] < cap {
                    let f = (cap - knots[n - 1]) / (knots[n] - knots[n - 1]);
                    knots[n] = cap;
                    heights[n] = heights[n - 1] + f * (heights[n] - heights[n - 1]);
                    knots.truncate(n + 1);
                } else {
                    knots.truncate(n);
                }
                heights.truncate(knots.len());
            }
            (s, trapezoid_over_heights(&knots, &heights, w).value)
        }
    };
    let mut value = w + integral / survival_at_w;
    if let Some(cap) = curve.upper_cap {
        // the support ends at the cap; only roundoff (or borrowed knot
        // heights) can push the mean past it
        if w < cap {
            value = value.min(cap);
        }
    }
    Ok(ConditionalMean {
        value,
        survival_at_w,
        integral,
    })
}

/// Per-knot heights `mean_{j : w_j = k} S0(k)^exp(eta_j)`.
pub fn knot_owner_heights(records: &[CensoredRecord], curve: &SurvivalCurve) -> Vec<f64> {
    let b = &curve.baseline;
    let mut sums = vec![0.0; b.knots().len()];
    let mut counts = vec![0usize; b.knots().len()];
    for r in records {
        if let Some(k) = b.knot_index(r.w) {
            if b.knots()[k] == r.w {
                sums[k] += b.heights()[k].powf(dot(&curve.lambda_hat, &r.z).exp());
                counts[k] += 1;
            }
        }
    }
    sums.iter()
        .zip(&counts)
        .zip(b.heights())
        .map(|((s, &c), h)| if c > 0 { s / c as f64 } else { *h })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordDiagnostics {
    pub imputed: bool,
    pub conditional_mean: Option<f64>,
    pub survival_at_w: Option<f64>,
    pub integral_value: Option<f64>,
    pub used_fallback_extension: bool,
    /// `w` lies past the largest uncensored value, so both numerator and
    /// denominator come from the extension.
    pub beyond_x_tilde: bool,
    #[serde(skip)]
    pub error: Option<Error>,
}

impl RecordDiagnostics {
    fn untouched() -> Self {
        Self {
            imputed: false,
            conditional_mean: None,
            survival_at_w: None,
            integral_value: None,
            used_fallback_extension: false,
            beyond_x_tilde: false,
            error: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ImputedDataset {
    /// Input records with `w` replaced for every imputed subject; `delta` is
    /// left as observed.
    pub records: Vec<CensoredRecord>,
    pub diagnostics: Vec<RecordDiagnostics>,
    pub cox: CoxFit,
    pub curve: SurvivalCurve,
}

impl ImputedDataset {
    pub fn n_imputed(&self) -> usize {
        self.diagnostics.iter().filter(|d| d.imputed).count()
    }

    pub fn n_failed(&self) -> usize {
        self.diagnostics.iter().filter(|d| d.error.is_some()).count()
    }

    pub fn used_fallback(&self) -> bool {
        self.curve.extension.used_fallback()
    }
}

/// Fits the survival model once, then imputes every censored record.
/// Records that cannot be imputed keep their `w` and carry the error in
/// their diagnostics; the call fails only if every censored record fails.
pub fn impute_dataset(records: &[CensoredRecord], config: &ImputationConfig) -> Result<ImputedDataset> {
    let p = validate_records(records)?;
    let treat_max = config.resolve_treat_max_as_event(p);
    let max_w = records.iter().map(|r| r.w).fold(f64::NEG_INFINITY, f64::max);

    let fit_records: std::borrow::Cow<[CensoredRecord]> = if treat_max {
        let mut v = records.to_vec();
        for r in v.iter_mut().filter(|r| r.w == max_w) {
            r.delta = true;
        }
        v.into()
    } else {
        records.into()
    };

    let cox = fit_cox(&fit_records, config.cox_tol, config.cox_max_iter)?;
    let baseline = breslow_baseline(&fit_records, &cox, config.interpolation)?;
    let extension = match config.approach {
        Approach::Extrapolated => fit_extension_with_fallback(config.extension, &fit_records, &baseline, &cox)?,
        Approach::NonExtrapolated => TailExtension::carry_forward(&baseline),
    };
    let curve = SurvivalCurve::new(baseline, cox.lambda_hat.clone(), extension, config.upper_cap)?;
    let owner = match (config.approach, config.trapezoid_heights) {
        (Approach::NonExtrapolated, TrapezoidHeights::KnotOwner) => Some(knot_owner_heights(&fit_records, &curve)),
        _ => None,
    };
    let fallback = curve.extension.used_fallback();
    let x_tilde = curve.baseline.x_tilde();

    let results: Vec<(Option<f64>, RecordDiagnostics)> = records
        .par_iter()
        .map(|r| {
            let mut d = RecordDiagnostics::untouched();
            if r.delta || (treat_max && r.w == max_w) {
                return (None, d);
            }
            d.used_fallback_extension = fallback;
            d.beyond_x_tilde = r.w > x_tilde;
            match conditional_mean_parts(&curve, r.w, &r.z, config, owner.as_deref()) {
                Ok(cm) => {
                    d.conditional_mean = Some(cm.value);
                    d.survival_at_w = Some(cm.survival_at_w);
                    d.integral_value = Some(cm.integral);
                    if cm.value > r.w {
                        d.imputed = true;
                        (Some(cm.value), d)
                    } else {
                        d.error = Some(Error::EmptyTail { w: r.w });
                        (None, d)
                    }
                }
                Err(e) => {
                    d.error = Some(e);
                    (None, d)
                }
            }
        })
        .collect();

    let attempted = results.iter().filter(|(_, d)| d.imputed || d.error.is_some()).count();
    if attempted > 0 && results.iter().all(|(_, d)| !d.imputed) {
        let first = results.iter().find_map(|(_, d)| d.error.clone());
        if let Some(e) = first {
            return Err(e);
        }
    }

    let mut out = records.to_vec();
    let mut diagnostics = Vec::with_capacity(records.len());
    for (rec, (value, d)) in out.iter_mut().zip(results) {
        if let Some(x) = value {
            rec.w = x;
        }
        diagnostics.push(d);
    }
    Ok(ImputedDataset {
        records: out,
        diagnostics,
        cox,
        curve,
    })
}
