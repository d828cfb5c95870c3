//! Cox proportional hazards fit by Newton-Raphson on the Breslow-ties
//! partial log-likelihood.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{dot, validate_records, CensoredRecord};
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100;
const MAX_HALVINGS: usize = 20;
/// A converged fit with `|lambda' z|` beyond this has chased a supremum at
/// infinity (separated data), not a maximum.
pub const MAX_LINEAR_PREDICTOR: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    /// Log hazard ratios, one per covariate.
    pub lambda_hat: Vec<f64>,
    pub loglik: f64,
    pub n_iter: usize,
    pub converged: bool,
}

impl CoxFit {
    /// The covariate-free fit (`p = 0`).
    pub fn empty() -> Self {
        Self {
            lambda_hat: Vec::new(),
            loglik: f64::NAN,
            n_iter: 0,
            converged: true,
        }
    }

    pub fn linear_predictor(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.lambda_hat.len() {
            return Err(Error::DimensionMismatch {
                expected: self.lambda_hat.len(),
                found: z.len(),
            });
        }
        Ok(dot(&self.lambda_hat, z))
    }
}

/// Partial log-likelihood, score and observed information at `lambda`.
#[derive(Debug, Clone)]
pub struct PartialLikelihood {
    pub loglik: f64,
    pub score: DVector<f64>,
    pub information: DMatrix<f64>,
}

/// Evaluates the Breslow-ties partial likelihood. Risk sets are
/// `{j : w_j >= w_i}` with exact comparison of `w`.
pub fn partial_likelihood(records: &[CensoredRecord], lambda: &[f64]) -> PartialLikelihood {
    let p = lambda.len();
    let eta: Vec<f64> = records.iter().map(|r| dot(lambda, &r.z)).collect();
    let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let shift = if shift.is_finite() { shift } else { 0.0 };

    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[b].w.total_cmp(&records[a].w));

    let mut s0 = 0.0;
    let mut s1 = DVector::<f64>::zeros(p);
    let mut s2 = DMatrix::<f64>::zeros(p, p);
    let mut loglik = 0.0;
    let mut score = DVector::<f64>::zeros(p);
    let mut information = DMatrix::<f64>::zeros(p, p);

    let mut start = 0;
    while start < order.len() {
        let w = records[order[start]].w;
        let mut end = start;
        while end < order.len() && records[order[end]].w == w {
            let i = order[end];
            let r = (eta[i] - shift).exp();
            let z = DVector::from_column_slice(&records[i].z);
            s0 += r;
            s1.axpy(r, &z, 1.0);
            s2 += r * &z * z.transpose();
            end += 1;
        }
        let mean = &s1 / s0;
        let cov = &s2 / s0 - &mean * mean.transpose();
        for &i in &order[start..end] {
            if records[i].delta {
                loglik += eta[i] - shift - s0.ln();
                let z = DVector::from_column_slice(&records[i].z);
                score += z - &mean;
                information += &cov;
            }
        }
        start = end;
    }

    PartialLikelihood {
        loglik,
        score,
        information,
    }
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// First covariate column at which the leading block of `info` stops being
/// positive definite.
fn singular_column(info: &DMatrix<f64>) -> usize {
    let p = info.nrows();
    for k in 1..=p {
        let block = info.view((0, 0), (k, k)).into_owned();
        let scale = block.diagonal().iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        match block.cholesky() {
            Some(ch) => {
                let dmin = ch
                    .l_dirty()
                    .diagonal()
                    .iter()
                    .fold(f64::INFINITY, |m, x| m.min(x.abs()));
                if dmin * dmin <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
                    return k - 1;
                }
            }
            None => return k - 1,
        }
    }
    p.saturating_sub(1)
}

/// Newton-Raphson with step-halving. `tol` bounds the score max-norm.
pub fn fit_cox(records: &[CensoredRecord], tol: f64, max_iter: usize) -> Result<CoxFit> {
    let p = validate_records(records)?;
    if !records.iter().any(|r| r.delta) {
        return Err(Error::NoEvents);
    }
    if p == 0 {
        let pl = partial_likelihood(records, &[]);
        return Ok(CoxFit {
            lambda_hat: Vec::new(),
            loglik: pl.loglik,
            n_iter: 0,
            converged: true,
        });
    }

    let mut lambda = DVector::<f64>::zeros(p);
    let mut pl = partial_likelihood(records, lambda.as_slice());
    for iter in 0..max_iter {
        if max_abs(&pl.score) <= tol {
            return finish(records, &lambda, pl.loglik, iter);
        }
        let step = match pl.information.clone().cholesky() {
            Some(ch) => ch.solve(&pl.score),
            None => {
                return Err(Error::SingularInformation {
                    column: singular_column(&pl.information),
                })
            }
        };
        if step.iter().any(|s| !s.is_finite()) {
            return Err(Error::SingularInformation {
                column: singular_column(&pl.information),
            });
        }

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate = &lambda + scale * &step;
            let next = partial_likelihood(records, candidate.as_slice());
            if next.loglik.is_finite() && next.loglik >= pl.loglik - 1e-12 * pl.loglik.abs() {
                accepted = Some((candidate, next));
                break;
            }
            scale *= 0.5;
        }
        match accepted {
            Some((l, next)) => {
                lambda = l;
                pl = next;
            }
            None => {
                return Err(Error::NotConverged {
                    iterations: iter + 1,
                    gradient: max_abs(&pl.score),
                })
            }
        }
    }
    if max_abs(&pl.score) <= tol {
        return finish(records, &lambda, pl.loglik, max_iter);
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        gradient: max_abs(&pl.score),
    })
}

fn finish(records: &[CensoredRecord], lambda: &DVector<f64>, loglik: f64, n_iter: usize) -> Result<CoxFit> {
    let max_eta = records
        .iter()
        .map(|r| dot(lambda.as_slice(), &r.z).abs())
        .fold(0.0, f64::max);
    if max_eta > MAX_LINEAR_PREDICTOR {
        return Err(Error::Separated {
            max_linear_predictor: max_eta,
        });
    }
    Ok(CoxFit {
        lambda_hat: lambda.iter().copied().collect(),
        loglik,
        n_iter,
        converged: true,
    })
}
