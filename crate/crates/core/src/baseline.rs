//! Breslow's estimator of the baseline survival function.

use serde::{Deserialize, Serialize};

use crate::cox::CoxFit;
use crate::data::{dot, CensoredRecord};
use crate::error::{Error, Result};

/// How the step baseline is read at censored knots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// Carry the last value forward (Breslow's estimator as defined).
    #[default]
    CarryForward,
    /// At a censored knot, average the values at the nearest uncensored
    /// knots below and above it.
    Mean,
}

impl Interpolation {
    pub fn name(self) -> &'static str {
        match self {
            Interpolation::CarryForward => "carry-forward",
            Interpolation::Mean => "mean",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSurvival {
    /// Distinct observed `w`, strictly increasing.
    knots: Vec<f64>,
    /// Breslow's estimate at each knot.
    values: Vec<f64>,
    /// Whether at least one event sits at the knot.
    event_flags: Vec<bool>,
    /// Values actually used for evaluation under `interpolation`.
    heights: Vec<f64>,
    x_tilde: f64,
    x_tilde_index: usize,
    interpolation: Interpolation,
}

impl BaselineSurvival {
    /// Builds a baseline from precomputed knots and values.
    pub fn from_parts(
        knots: Vec<f64>,
        values: Vec<f64>,
        event_flags: Vec<bool>,
        interpolation: Interpolation,
    ) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::EmptyData);
        }
        if knots.len() != values.len() || knots.len() != event_flags.len() {
            return Err(Error::InvalidArgument(
                "knots, values and event flags differ in length".into(),
            ));
        }
        if knots.windows(2).any(|k| k[0] >= k[1]) || knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidArgument("knots must be finite and strictly increasing".into()));
        }
        if values.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) || values.windows(2).any(|v| v[1] > v[0]) {
            return Err(Error::InvalidArgument(
                "values must be non-increasing and lie in (0, 1]".into(),
            ));
        }
        let x_tilde_index = event_flags.iter().rposition(|&e| e).ok_or(Error::NoEvents)?;
        let heights = interpolate(&values, &event_flags, interpolation);
        Ok(Self {
            x_tilde: knots[x_tilde_index],
            knots,
            values,
            event_flags,
            heights,
            x_tilde_index,
            interpolation,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn event_flags(&self) -> &[bool] {
        &self.event_flags
    }

    /// Per-knot values after interpolation.
    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    /// Largest uncensored value.
    pub fn x_tilde(&self) -> f64 {
        self.x_tilde
    }

    pub fn x_tilde_index(&self) -> usize {
        self.x_tilde_index
    }

    /// Estimated baseline survival at the largest uncensored value.
    pub fn survival_at_x_tilde(&self) -> f64 {
        self.heights[self.x_tilde_index]
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn with_interpolation(&self, interpolation: Interpolation) -> Self {
        let mut out = self.clone();
        out.heights = interpolate(&self.values, &self.event_flags, interpolation);
        out.interpolation = interpolation;
        out
    }

    /// Index of the last knot `<= t`, if any.
    pub fn knot_index(&self, t: f64) -> Option<usize> {
        let pos = self.knots.partition_point(|&k| k <= t);
        pos.checked_sub(1)
    }

    /// Step evaluation of the baseline at `t`, carrying the last height
    /// forward past the largest knot.
    pub fn step_value(&self, t: f64) -> f64 {
        match self.knot_index(t) {
            Some(k) => self.heights[k],
            None => 1.0,
        }
    }
}

fn interpolate(values: &[f64], events: &[bool], mode: Interpolation) -> Vec<f64> {
    match mode {
        Interpolation::CarryForward => values.to_vec(),
        Interpolation::Mean => {
            let n = values.len();
            let mut out = values.to_vec();
            // next uncensored knot strictly above each position
            let mut next_event = vec![None; n];
            let mut nxt = None;
            for k in (0..n).rev() {
                next_event[k] = nxt;
                if events[k] {
                    nxt = Some(k);
                }
            }
            for k in 0..n {
                if events[k] {
                    continue;
                }
                if let Some(j) = next_event[k] {
                    out[k] = 0.5 * (values[k] + values[j]);
                }
            }
            out
        }
    }
}

/// Breslow's estimator: `exp(-sum_{w_i <= t} delta_i / sum_{w_j >= w_i} exp(eta_j))`.
/// Tied `w` collapse to one knot carrying the summed events.
pub fn breslow_baseline(
    records: &[CensoredRecord],
    fit: &CoxFit,
    interpolation: Interpolation,
) -> Result<BaselineSurvival> {
    if records.is_empty() {
        return Err(Error::EmptyData);
    }
    if !records.iter().any(|r| r.delta) {
        return Err(Error::NoEvents);
    }
    let p = fit.lambda_hat.len();
    if let Some(r) = records.iter().find(|r| r.z.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: r.z.len(),
        });
    }

    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[a].w.total_cmp(&records[b].w));
    let risk: Vec<f64> = order
        .iter()
        .map(|&i| dot(&fit.lambda_hat, &records[i].z).exp())
        .collect();

    // suffix sums give the risk-set totals
    let mut suffix = vec![0.0; order.len() + 1];
    for k in (0..order.len()).rev() {
        suffix[k] = suffix[k + 1] + risk[k];
    }

    let mut knots = Vec::new();
    let mut values = Vec::new();
    let mut event_flags = Vec::new();
    let mut cumhaz = 0.0;
    let mut start = 0;
    while start < order.len() {
        let w = records[order[start]].w;
        let mut end = start;
        let mut events = 0usize;
        while end < order.len() && records[order[end]].w == w {
            if records[order[end]].delta {
                events += 1;
            }
            end += 1;
        }
        if events > 0 {
            cumhaz += events as f64 / suffix[start];
        }
        knots.push(w);
        // a separated fit can push the hazard past exp underflow
        values.push((-cumhaz).exp().max(f64::MIN_POSITIVE));
        event_flags.push(events > 0);
        start = end;
    }

    BaselineSurvival::from_parts(knots, values, event_flags, interpolation)
}
