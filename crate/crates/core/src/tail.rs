//! Extensions of the baseline survival beyond the largest uncensored value.
//!
//! The step baseline is undefined past `x_tilde`; each extension fixes a rule
//! for `S0(t)`, `t > x_tilde`:
//!
//! * carry-forward: `S0(t) = S0(x_tilde)` (the integral to infinity diverges)
//! * drop-off: `S0(t) = 0`
//! * exponential: `S0(t) = exp(t log S0(x_tilde) / x_tilde)`
//! * Weibull: `S0(t) = exp(-rho t^nu)`, with `rho` pinned by continuity at
//!   `x_tilde` and `nu` chosen by profile maximum likelihood.

use serde::{Deserialize, Serialize};

use crate::baseline::BaselineSurvival;
use crate::cox::CoxFit;
use crate::data::{dot, CensoredRecord};
use crate::error::{Error, Result};
use crate::quadrature::gauss_kronrod::{self, Quadrature, Tolerance};
use crate::special::{ln_upper_gamma, weibull_survival_integral};

pub const SHAPE_MIN: f64 = 0.05;
pub const SHAPE_MAX: f64 = 20.0;
const SHAPE_GRID: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtensionKind {
    CarryForward,
    DropOff,
    Exponential,
    #[default]
    Weibull,
}

impl ExtensionKind {
    pub const ALL: [ExtensionKind; 4] = [
        ExtensionKind::CarryForward,
        ExtensionKind::DropOff,
        ExtensionKind::Exponential,
        ExtensionKind::Weibull,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExtensionKind::CarryForward => "carry-forward",
            ExtensionKind::DropOff => "drop-off",
            ExtensionKind::Exponential => "exponential",
            ExtensionKind::Weibull => "weibull",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailExtension {
    kind: ExtensionKind,
    x_tilde: f64,
    /// `S0(x_tilde)`, the value every extension must start from.
    anchor: f64,
    /// Weibull shape; 1 for the exponential kind.
    nu: Option<f64>,
    /// Weibull rate on the baseline scale.
    rho: Option<f64>,
    fit_converged: Option<bool>,
    /// Set when a failed Weibull fit was replaced by the exponential tie-in.
    used_fallback: bool,
}

impl TailExtension {
    fn plain(kind: ExtensionKind, x_tilde: f64, anchor: f64) -> Self {
        Self {
            kind,
            x_tilde,
            anchor,
            nu: None,
            rho: None,
            fit_converged: None,
            used_fallback: false,
        }
    }

    pub fn carry_forward(baseline: &BaselineSurvival) -> Self {
        Self::plain(ExtensionKind::CarryForward, baseline.x_tilde(), baseline.survival_at_x_tilde())
    }

    pub fn drop_off(baseline: &BaselineSurvival) -> Self {
        Self::plain(ExtensionKind::DropOff, baseline.x_tilde(), baseline.survival_at_x_tilde())
    }

    pub fn exponential(baseline: &BaselineSurvival) -> Result<Self> {
        let (x, s) = (baseline.x_tilde(), baseline.survival_at_x_tilde());
        check_parametric_anchor(x, s)?;
        let rate = -s.ln() / x;
        Ok(Self {
            nu: Some(1.0),
            rho: Some(rate),
            ..Self::plain(ExtensionKind::Exponential, x, s)
        })
    }

    /// Weibull tie-in with the shape fixed at `nu`.
    pub fn weibull_with_shape(baseline: &BaselineSurvival, nu: f64) -> Result<Self> {
        let (x, s) = (baseline.x_tilde(), baseline.survival_at_x_tilde());
        check_parametric_anchor(x, s)?;
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidArgument(format!("Weibull shape {nu} must be positive")));
        }
        Ok(Self {
            nu: Some(nu),
            rho: Some(-s.ln() / x.powf(nu)),
            ..Self::plain(ExtensionKind::Weibull, x, s)
        })
    }

    /// A Weibull tail `exp(-rho t^nu)` starting at `x_tilde`, with the anchor
    /// implied by continuity. `x_tilde = 0` gives a fully parametric curve.
    pub fn parametric(x_tilde: f64, nu: f64, rho: f64) -> Result<Self> {
        if !(nu > 0.0 && rho > 0.0 && x_tilde >= 0.0) {
            return Err(Error::InvalidArgument("parametric tail needs nu, rho > 0".into()));
        }
        let kind = if nu == 1.0 {
            ExtensionKind::Exponential
        } else {
            ExtensionKind::Weibull
        };
        Ok(Self {
            nu: Some(nu),
            rho: Some(rho),
            ..Self::plain(kind, x_tilde, (-rho * x_tilde.powf(nu)).exp())
        })
    }

    pub fn kind(&self) -> ExtensionKind {
        self.kind
    }

    pub fn x_tilde(&self) -> f64 {
        self.x_tilde
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn nu(&self) -> Option<f64> {
        self.nu
    }

    pub fn rho(&self) -> Option<f64> {
        self.rho
    }

    pub fn fit_converged(&self) -> Option<bool> {
        self.fit_converged
    }

    pub fn used_fallback(&self) -> bool {
        self.used_fallback
    }

    /// Baseline survival for `t > x_tilde`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t <= self.x_tilde {
            return Err(Error::OutOfRange {
                t,
                x_tilde: self.x_tilde,
            });
        }
        Ok(self.value(t))
    }

    pub(crate) fn value(&self, t: f64) -> f64 {
        match self.kind {
            ExtensionKind::CarryForward => self.anchor,
            ExtensionKind::DropOff => 0.0,
            ExtensionKind::Exponential | ExtensionKind::Weibull => {
                let (nu, rho) = self.params();
                (-rho * t.powf(nu)).exp()
            }
        }
    }

    /// `S0(t)^exponent`, computed on the log scale for parametric tails.
    fn powered(&self, t: f64, exponent: f64) -> f64 {
        match self.kind {
            ExtensionKind::Exponential | ExtensionKind::Weibull => {
                let (nu, rho) = self.params();
                (-exponent * rho * t.powf(nu)).exp()
            }
            _ => self.value(t).powf(exponent),
        }
    }

    fn params(&self) -> (f64, f64) {
        (self.nu.unwrap_or(1.0), self.rho.unwrap_or(0.0))
    }

    /// `∫_from^upper S0(t)^exponent dt`, `upper = upper_cap` or infinity.
    pub fn tail_integral(&self, from: f64, exponent: f64, upper_cap: Option<f64>) -> Result<f64> {
        if from < self.x_tilde {
            return Err(Error::OutOfRange {
                t: from,
                x_tilde: self.x_tilde,
            });
        }
        if !(exponent > 0.0) {
            return Err(Error::InvalidArgument(format!("exponent {exponent} must be positive")));
        }
        let upper = upper_cap.unwrap_or(f64::INFINITY);
        if from >= upper {
            return Ok(0.0);
        }
        match self.kind {
            ExtensionKind::DropOff => Ok(0.0),
            ExtensionKind::CarryForward => {
                if upper.is_infinite() {
                    Err(Error::Divergent)
                } else {
                    Ok(self.anchor.powf(exponent) * (upper - from))
                }
            }
            ExtensionKind::Exponential | ExtensionKind::Weibull => {
                let (nu, rho) = self.params();
                Ok(weibull_survival_integral(exponent * rho, nu, from, upper))
            }
        }
    }

    /// `∫_w^upper S0(t)^exponent dt / S0(w)^exponent` for `w > x_tilde`,
    /// formed without evaluating `S0(w)^exponent`, which can underflow far
    /// into a parametric tail.
    pub fn residual_mean(&self, w: f64, exponent: f64, upper_cap: Option<f64>) -> Result<f64> {
        if w <= self.x_tilde {
            return Err(Error::OutOfRange {
                t: w,
                x_tilde: self.x_tilde,
            });
        }
        let upper = upper_cap.unwrap_or(f64::INFINITY);
        if w >= upper {
            return Ok(0.0);
        }
        match self.kind {
            ExtensionKind::DropOff => Err(Error::ZeroSurvival { w }),
            ExtensionKind::CarryForward if upper.is_infinite() => Err(Error::Divergent),
            ExtensionKind::CarryForward => Ok(upper - w),
            ExtensionKind::Exponential | ExtensionKind::Weibull => {
                let (nu, rho) = self.params();
                let r = rho * exponent;
                let base = r * w.powf(nu);
                if upper.is_finite() {
                    if nu == 1.0 {
                        return Ok(-(-r * (upper - w)).exp_m1() / r);
                    }
                    let tol = Tolerance {
                        abs: 0.0,
                        ..Tolerance::default()
                    };
                    return Ok(gauss_kronrod::integrate(|t| (base - r * t.powf(nu)).exp(), w, upper, tol).value);
                }
                let s = 1.0 / nu;
                Ok((base + ln_upper_gamma(s, base) - s * r.ln() - nu.ln()).exp())
            }
        }
    }

    /// Same integral by adaptive Gauss-Kronrod quadrature.
    pub fn tail_integral_adaptive(
        &self,
        from: f64,
        exponent: f64,
        upper_cap: Option<f64>,
        tol: Tolerance,
    ) -> Result<Quadrature> {
        if from < self.x_tilde {
            return Err(Error::OutOfRange {
                t: from,
                x_tilde: self.x_tilde,
            });
        }
        let upper = upper_cap.unwrap_or(f64::INFINITY);
        if self.kind == ExtensionKind::CarryForward && upper.is_infinite() {
            return Err(Error::Divergent);
        }
        if from >= upper {
            return Ok(gauss_kronrod::integrate(|_| 0.0, from, from, tol));
        }
        Ok(gauss_kronrod::integrate(
            |t| self.powered(t, exponent),
            from,
            upper,
            tol,
        ))
    }
}

fn check_parametric_anchor(x_tilde: f64, s: f64) -> Result<()> {
    if !(s < 1.0) || !(s > 0.0) || !(x_tilde > 0.0) {
        return Err(Error::DegenerateTail { survival: s });
    }
    Ok(())
}

/// Profile log-likelihood of the Weibull shape under the continuity
/// constraint, with the Cox linear predictor as a fixed offset:
/// `S(w | z) = exp(-c e^eta (w / x_tilde)^nu)`, `c = -log S0(x_tilde)`.
#[derive(Debug, Clone)]
pub struct WeibullProfile {
    c: f64,
    x_tilde: f64,
    /// (log(w / x_tilde), log w, eta, delta) for records with w > 0
    terms: Vec<(f64, f64, f64, bool)>,
    events: usize,
    event_eta_sum: f64,
}

impl WeibullProfile {
    pub fn new(records: &[CensoredRecord], baseline: &BaselineSurvival, fit: &CoxFit) -> Result<Self> {
        let (x, s) = (baseline.x_tilde(), baseline.survival_at_x_tilde());
        check_parametric_anchor(x, s)?;
        let mut terms = Vec::with_capacity(records.len());
        let mut events = 0;
        let mut event_eta_sum = 0.0;
        for r in records.iter().filter(|r| r.w > 0.0) {
            if r.z.len() != fit.lambda_hat.len() {
                return Err(Error::DimensionMismatch {
                    expected: fit.lambda_hat.len(),
                    found: r.z.len(),
                });
            }
            let eta = dot(&fit.lambda_hat, &r.z);
            if r.delta {
                events += 1;
                event_eta_sum += eta;
            }
            terms.push(((r.w / x).ln(), r.w.ln(), eta, r.delta));
        }
        Ok(Self {
            c: -s.ln(),
            x_tilde: x,
            terms,
            events,
            event_eta_sum,
        })
    }

    pub fn rate(&self, nu: f64) -> f64 {
        self.c / self.x_tilde.powf(nu)
    }

    pub fn loglik(&self, nu: f64) -> f64 {
        let mut ll = self.events as f64 * (nu.ln() + self.c.ln()) + self.event_eta_sum;
        for &(log_ratio, log_w, eta, delta) in &self.terms {
            if delta {
                ll += nu * log_ratio - log_w;
            }
            ll -= self.c * (eta + nu * log_ratio).exp();
        }
        ll
    }

    /// Grid bracketing on a log-spaced grid followed by golden-section search
    /// in `log nu`. A maximum on the grid boundary is reported as
    /// `NonConvergence`.
    pub fn maximize(&self) -> Result<f64> {
        let (lo, hi) = (SHAPE_MIN.ln(), SHAPE_MAX.ln());
        let grid: Vec<f64> = (0..SHAPE_GRID)
            .map(|i| lo + (hi - lo) * i as f64 / (SHAPE_GRID - 1) as f64)
            .collect();
        let vals: Vec<f64> = grid.iter().map(|&g| self.loglik(g.exp())).collect();
        let best = vals
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i);
        let best = match best {
            Some(i) => i,
            None => return Err(Error::NonConvergence { shape: f64::NAN }),
        };
        if best == 0 || best == SHAPE_GRID - 1 {
            return Err(Error::NonConvergence {
                shape: grid[best].exp(),
            });
        }
        let f = |g: f64| -self.loglik(g.exp());
        Ok(golden_section(f, grid[best - 1], grid[best + 1], 1e-10).exp())
    }
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Fits the requested extension. `fit` supplies the offsets for the Weibull
/// likelihood.
pub fn fit_extension(
    kind: ExtensionKind,
    records: &[CensoredRecord],
    baseline: &BaselineSurvival,
    fit: &CoxFit,
) -> Result<TailExtension> {
    match kind {
        ExtensionKind::CarryForward => Ok(TailExtension::carry_forward(baseline)),
        ExtensionKind::DropOff => Ok(TailExtension::drop_off(baseline)),
        ExtensionKind::Exponential => TailExtension::exponential(baseline),
        ExtensionKind::Weibull => {
            let profile = WeibullProfile::new(records, baseline, fit)?;
            let nu = profile.maximize()?;
            Ok(TailExtension {
                rho: Some(profile.rate(nu)),
                nu: Some(nu),
                fit_converged: Some(true),
                ..TailExtension::plain(ExtensionKind::Weibull, baseline.x_tilde(), baseline.survival_at_x_tilde())
            })
        }
    }
}

/// As [`fit_extension`], but a Weibull `NonConvergence` falls back to the
/// exponential tie-in, flagged through [`TailExtension::used_fallback`].
pub fn fit_extension_with_fallback(
    kind: ExtensionKind,
    records: &[CensoredRecord],
    baseline: &BaselineSurvival,
    fit: &CoxFit,
) -> Result<TailExtension> {
    match fit_extension(kind, records, baseline, fit) {
        Err(Error::NonConvergence { .. }) => {
            let mut ext = TailExtension::exponential(baseline)?;
            ext.fit_converged = Some(false);
            ext.used_fallback = true;
            Ok(ext)
        }
        other => other,
    }
}
