//! Subject-level records with a randomly right-censored covariate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One subject: outcome `y`, observed covariate `w = min(x, c)`, indicator
/// `delta = 1{x <= c}` and the fully observed covariates `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoredRecord {
    pub y: f64,
    pub w: f64,
    pub delta: bool,
    pub z: Vec<f64>,
}

impl CensoredRecord {
    pub fn new(y: f64, w: f64, delta: bool, z: Vec<f64>) -> Self {
        Self { y, w, delta, z }
    }

    pub fn is_censored(&self) -> bool {
        !self.delta
    }
}

/// Checks the record invariants and returns the shared covariate dimension.
pub fn validate_records(records: &[CensoredRecord]) -> Result<usize> {
    let first = records.first().ok_or(Error::EmptyData)?;
    let p = first.z.len();
    for (index, r) in records.iter().enumerate() {
        if !r.w.is_finite() || r.w < 0.0 {
            return Err(Error::InvalidRecord {
                index,
                reason: format!("w = {} must be finite and non-negative", r.w),
            });
        }
        if r.z.len() != p {
            return Err(Error::InvalidRecord {
                index,
                reason: format!("has {} covariates, expected {p}", r.z.len()),
            });
        }
        if r.z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRecord {
                index,
                reason: "non-finite covariate".into(),
            });
        }
    }
    Ok(p)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fraction of records with `delta = 0`.
pub fn censoring_fraction(records: &[CensoredRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().filter(|r| r.is_censored()).count() as f64 / records.len() as f64
}
