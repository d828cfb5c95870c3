//! Ordinary least squares for the outcome model with sandwich covariance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Relative size of a QR pivot, against its column norm, below which the
/// column is treated as a linear combination of the ones before it.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SandwichFlavor {
    #[default]
    Hc0,
    /// HC0 scaled by `n / (n - k)`.
    Hc1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    /// Regression coefficients, in design column order.
    pub coefficients: Vec<f64>,
    /// `RSS / (n - k)`.
    pub sigma2: f64,
    pub cov_sandwich: DMatrix<f64>,
    pub cov_classical: DMatrix<f64>,
    pub residuals: Vec<f64>,
    pub n: usize,
}

impl RegressionFit {
    pub fn k(&self) -> usize {
        self.coefficients.len()
    }

    /// Coefficients followed by the residual variance.
    pub fn theta(&self) -> Vec<f64> {
        let mut t = self.coefficients.clone();
        t.push(self.sigma2);
        t
    }

    pub fn sandwich_se(&self) -> Vec<f64> {
        self.cov_sandwich.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect()
    }

    pub fn classical_se(&self) -> Vec<f64> {
        self.cov_classical.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect()
    }
}

fn design_matrix<R: AsRef<[f64]>>(rows: &[R]) -> Result<DMatrix<f64>> {
    let k = rows.first().map_or(0, |r| r.as_ref().len());
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != k {
            return Err(Error::DimensionMismatch { expected: k, found: r.len() });
        }
        if let Some(v) = r.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidRecord {
                index: i,
                reason: format!("non-finite design value {v}"),
            });
        }
    }
    Ok(DMatrix::from_fn(rows.len(), k, |i, j| rows[i].as_ref()[j]))
}

/// `(X'X)^-1` from the R factor of a thin QR, with the rank check.
fn bread(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let (n, k) = x.shape();
    if n <= k {
        return Err(Error::TooFewRows { rows: n, columns: k });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..k {
        let norm = x.column(j).norm();
        if norm == 0.0 || r[(j, j)].abs() <= RANK_TOL * norm {
            return Err(Error::RankDeficient { column: j });
        }
    }
    let r_inv = r
        .clone()
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(Error::RankDeficient { column: k - 1 })?;
    let xtx_inv = &r_inv * r_inv.transpose();
    Ok((qr.q(), r, xtx_inv))
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// HC0 or HC1 sandwich `(X'X)^-1 X' diag(r^2) X (X'X)^-1`.
pub fn sandwich_cov<R: AsRef<[f64]>>(rows: &[R], residuals: &[f64], flavor: SandwichFlavor) -> Result<DMatrix<f64>> {
    let x = design_matrix(rows)?;
    if residuals.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: residuals.len(),
        });
    }
    let (_, _, b) = bread(&x)?;
    Ok(sandwich_from(&x, &b, residuals, flavor))
}

fn sandwich_from(x: &DMatrix<f64>, bread: &DMatrix<f64>, residuals: &[f64], flavor: SandwichFlavor) -> DMatrix<f64> {
    let (n, k) = x.shape();
    let mut weighted = x.clone();
    for (i, r) in residuals.iter().enumerate() {
        weighted.row_mut(i).scale_mut(r * r);
    }
    let meat = x.transpose() * weighted;
    let mut cov = bread * meat * bread;
    if flavor == SandwichFlavor::Hc1 {
        cov *= n as f64 / (n - k) as f64;
    }
    symmetrize(&mut cov);
    cov
}

/// Least squares fit of `y` on the design rows (include a column of ones for
/// an intercept). The solve goes through a thin QR factorisation.
pub fn fit_ols<R: AsRef<[f64]>>(y: &[f64], rows: &[R]) -> Result<RegressionFit> {
    fit_ols_with(y, rows, SandwichFlavor::Hc0)
}

pub fn fit_ols_with<R: AsRef<[f64]>>(y: &[f64], rows: &[R], flavor: SandwichFlavor) -> Result<RegressionFit> {
    if y.len() != rows.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            found: y.len(),
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyData);
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidRecord {
            index: i,
            reason: format!("non-finite outcome {}", y[i]),
        });
    }
    let x = design_matrix(rows)?;
    let (n, k) = x.shape();
    let (q, r, xtx_inv) = bread(&x)?;
    let yv = DVector::from_column_slice(y);
    let beta = r
        .solve_upper_triangular(&(q.transpose() * &yv))
        .ok_or(Error::RankDeficient { column: k - 1 })?;
    let resid = &yv - &x * &beta;
    let rss = resid.norm_squared();
    let sigma2 = rss / (n - k) as f64;
    let residuals: Vec<f64> = resid.iter().copied().collect();
    let cov_sandwich = sandwich_from(&x, &xtx_inv, &residuals, flavor);
    let mut cov_classical = xtx_inv * sigma2;
    symmetrize(&mut cov_classical);
    Ok(RegressionFit {
        coefficients: beta.iter().copied().collect(),
        sigma2,
        cov_sandwich,
        cov_classical,
        residuals,
        n,
    })
}

/// Two-sided normal-quantile Wald intervals from the sandwich covariance.
pub fn wald_ci(fit: &RegressionFit, level: f64) -> Result<Vec<(f64, f64)>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence level {level} outside (0, 1)")));
    }
    let q = Normal::standard().inverse_cdf(0.5 + level / 2.0);
    Ok(fit
        .coefficients
        .iter()
        .zip(fit.sandwich_se())
        .map(|(&b, se)| (b - q * se, b + q * se))
        .collect())
}
