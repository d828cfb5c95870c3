//! Conditional survival `S(t | z) = S0(t)^exp(lambda' z)` assembled from the
//! step baseline and a tail extension.

use serde::{Deserialize, Serialize};

use crate::baseline::BaselineSurvival;
use crate::data::dot;
use crate::error::{Error, Result};
use crate::tail::TailExtension;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub baseline: BaselineSurvival,
    pub lambda_hat: Vec<f64>,
    pub extension: TailExtension,
    /// Finite integration horizon, if any.
    pub upper_cap: Option<f64>,
}

impl SurvivalCurve {
    pub fn new(
        baseline: BaselineSurvival,
        lambda_hat: Vec<f64>,
        extension: TailExtension,
        upper_cap: Option<f64>,
    ) -> Result<Self> {
        if extension.x_tilde() != baseline.x_tilde() {
            return Err(Error::InvalidArgument(
                "extension was fitted to a different baseline".into(),
            ));
        }
        if let Some(cap) = upper_cap {
            if !(cap > 0.0) {
                return Err(Error::InvalidArgument(format!("upper cap {cap} must be positive")));
            }
        }
        Ok(Self {
            baseline,
            lambda_hat,
            extension,
            upper_cap,
        })
    }

    pub fn dim(&self) -> usize {
        self.lambda_hat.len()
    }

    /// `exp(lambda' z)`.
    pub fn exponent(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.lambda_hat.len() {
            return Err(Error::DimensionMismatch {
                expected: self.lambda_hat.len(),
                found: z.len(),
            });
        }
        Ok(dot(&self.lambda_hat, z).exp())
    }

    /// Baseline survival at `t`: step function up to `x_tilde`, extension
    /// afterwards.
    pub fn baseline_value(&self, t: f64) -> f64 {
        if t <= self.baseline.x_tilde() {
            self.baseline.step_value(t)
        } else {
            self.extension.value(t)
        }
    }

    pub fn eval(&self, t: f64, z: &[f64]) -> Result<f64> {
        let e = self.exponent(z)?;
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("t = {t} must be non-negative")));
        }
        Ok(self.baseline_value(t).powf(e))
    }
}

/// Free-function form of [`SurvivalCurve::eval`].
pub fn eval_survival(curve: &SurvivalCurve, t: f64, z: &[f64]) -> Result<f64> {
    curve.eval(t, z)
}
