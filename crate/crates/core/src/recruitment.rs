//! Time-to-diagnosis imputation, the symptom progression model and
//! rank-based trial recruitment.

use std::cmp::Ordering;

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::CensoredRecord;
use crate::error::{Error, Result};
use crate::imputation::{impute_dataset, Approach, ImputationConfig};
use crate::regression::{fit_ols, RegressionFit};

pub const DAYS_PER_YEAR: f64 = 365.25;
pub const AGE_CENTER: f64 = 18.0;
pub const CAG_CENTER: f64 = 36.0;
pub const CUHDRS_CENTER: f64 = 23.8;
pub const DEFAULT_UPPER_CAP: f64 = 60.0;
pub const DEFAULT_HORIZON: f64 = 2.0;
pub const DEFAULT_TRIAL_SIZE: usize = 200;
pub const DEFAULT_RESAMPLES: usize = 100;

pub const PROGRESSION_TERMS: [&str; 7] = [
    "intercept",
    "time_end",
    "cuhdrs_start",
    "time_end:cuhdrs_start",
    "age",
    "cag",
    "age:cag",
];

/// Composite UHDRS from total functional capacity, total motor score, symbol
/// digit modalities and Stroop word reading.
pub fn cuhdrs(tfc: f64, tms: f64, sdmt: f64, swr: f64) -> f64 {
    (tfc - 10.4) / 1.9 - (tms - 29.7) / 14.9 + (sdmt - 28.4) / 11.3 + (swr - 66.1) / 20.1 + 10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectVisits {
    pub subject_id: String,
    pub first_visit_date: NaiveDate,
    pub last_visit_date: NaiveDate,
    pub diagnosis_date: Option<NaiveDate>,
    pub age_at_first_visit: f64,
    pub cag: u32,
    pub cuhdrs_start: f64,
    pub cuhdrs_end: f64,
}

fn years_between(from: NaiveDate, to: NaiveDate) -> f64 {
    (to - from).num_days() as f64 / DAYS_PER_YEAR
}

impl SubjectVisits {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidDates {
            subject: self.subject_id.clone(),
            reason,
        };
        if self.last_visit_date <= self.first_visit_date {
            return Err(bad(format!(
                "last visit {} is not after first visit {}",
                self.last_visit_date, self.first_visit_date
            )));
        }
        if let Some(d) = self.diagnosis_date {
            if d < self.first_visit_date || d > self.last_visit_date {
                return Err(bad(format!("diagnosis {d} lies outside the visit window")));
            }
        }
        if self.cag < 36 {
            return Err(Error::InvalidArgument(format!(
                "subject {}: CAG {} is below 36",
                self.subject_id, self.cag
            )));
        }
        for (name, v) in [
            ("age_at_first_visit", self.age_at_first_visit),
            ("cuhdrs_start", self.cuhdrs_start),
            ("cuhdrs_end", self.cuhdrs_end),
        ] {
            if !v.is_finite() {
                return Err(Error::MissingCovariate(format!("{name} for subject {}", self.subject_id)));
            }
        }
        Ok(())
    }

    pub fn follow_up(&self) -> f64 {
        years_between(self.first_visit_date, self.last_visit_date)
    }

    /// Centered `(AGE - 18, CAG - 36)`, the covariates of the survival model.
    pub fn centered_covariates(&self) -> [f64; 2] {
        [self.age_at_first_visit - AGE_CENTER, self.cag as f64 - CAG_CENTER]
    }
}

/// Times in years. `time_end` is positive when diagnosis falls after the last
/// visit and negative when it fell during follow-up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedTimes {
    pub subject_id: String,
    pub time_start: f64,
    pub censored: bool,
    pub follow_up: f64,
    pub time_end: f64,
    pub imputed: bool,
}

pub fn derive_times(visits: &[SubjectVisits]) -> Result<Vec<DerivedTimes>> {
    visits
        .iter()
        .map(|v| {
            v.validate()?;
            let follow_up = v.follow_up();
            let (time_start, censored) = match v.diagnosis_date {
                Some(d) => (years_between(v.first_visit_date, d), false),
                None => (follow_up, true),
            };
            Ok(DerivedTimes {
                subject_id: v.subject_id.clone(),
                time_start,
                censored,
                follow_up,
                time_end: time_start - follow_up,
                imputed: false,
            })
        })
        .collect()
}

/// Replaces censored `time_start` with its conditional mean given centered
/// AGE and CAG, then recomputes `time_end`.
pub fn impute_times(
    visits: &[SubjectVisits],
    derived: &[DerivedTimes],
    config: &ImputationConfig,
) -> Result<Vec<DerivedTimes>> {
    if visits.len() != derived.len() {
        return Err(Error::DimensionMismatch {
            expected: visits.len(),
            found: derived.len(),
        });
    }
    if derived.iter().all(|d| !d.censored) {
        return Ok(derived.to_vec());
    }
    let records: Vec<CensoredRecord> = visits
        .iter()
        .zip(derived)
        .map(|(v, d)| CensoredRecord::new(v.cuhdrs_end, d.time_start, !d.censored, v.centered_covariates().to_vec()))
        .collect();
    let imputed = impute_dataset(&records, config)?;
    Ok(derived
        .iter()
        .zip(imputed.records.iter().zip(&imputed.diagnostics))
        .map(|(d, (r, diag))| {
            let mut out = d.clone();
            if diag.imputed {
                out.time_start = r.w;
                out.time_end = r.w - d.follow_up;
                out.imputed = true;
            }
            out
        })
        .collect())
}

/// Imputed diagnosis date: first visit plus `time_start`, to the nearest day.
pub fn diagnosis_date_estimate(visit: &SubjectVisits, times: &DerivedTimes) -> Option<NaiveDate> {
    let days = (times.time_start * DAYS_PER_YEAR).round();
    if !(days >= 0.0 && days < u32::MAX as f64) {
        return None;
    }
    visit.first_visit_date.checked_add_days(Days::new(days as u64))
}

/// Design row of the progression model with the usual centering.
pub fn progression_row(time_end: f64, cuhdrs_start: f64, age: f64, cag: f64) -> [f64; 7] {
    let c = cuhdrs_start - CUHDRS_CENTER;
    let a = age - AGE_CENTER;
    let g = cag - CAG_CENTER;
    [1.0, time_end, c, time_end * c, a, g, a * g]
}

/// OLS of `cuhdrs_end` on the progression design.
pub fn fit_progression(visits: &[SubjectVisits], times: &[DerivedTimes]) -> Result<RegressionFit> {
    if visits.len() != times.len() {
        return Err(Error::DimensionMismatch {
            expected: visits.len(),
            found: times.len(),
        });
    }
    let rows: Vec<[f64; 7]> = visits
        .iter()
        .zip(times)
        .map(|(v, t)| progression_row(t.time_end, v.cuhdrs_start, v.age_at_first_visit, v.cag as f64))
        .collect();
    let y: Vec<f64> = visits.iter().map(|v| v.cuhdrs_end).collect();
    fit_ols(&y, &rows)
}

/// A subject at recruitment: current score and time to diagnosis measured
/// from the recruitment visit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecruitmentState {
    pub time_end: f64,
    pub cuhdrs_now: f64,
    pub age: f64,
    pub cag: f64,
}

/// Predicted cUHDRS change over a trial lasting `horizon` years:
/// the model is evaluated with the current score as `cuhdrs_start` and time
/// to diagnosis shortened by the horizon.
pub fn predict_change(coefficients: &[f64], state: &RecruitmentState, horizon: f64) -> Result<(f64, f64)> {
    if coefficients.len() != PROGRESSION_TERMS.len() {
        return Err(Error::DimensionMismatch {
            expected: PROGRESSION_TERMS.len(),
            found: coefficients.len(),
        });
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon {horizon} must be positive")));
    }
    for (name, v) in [
        ("time_end", state.time_end),
        ("cuhdrs", state.cuhdrs_now),
        ("age", state.age),
        ("cag", state.cag),
    ] {
        if !v.is_finite() {
            return Err(Error::MissingCovariate(name.into()));
        }
    }
    let row = progression_row(state.time_end - horizon, state.cuhdrs_now, state.age, state.cag);
    let predicted_end: f64 = row.iter().zip(coefficients).map(|(x, b)| x * b).sum();
    Ok((predicted_end, predicted_end - state.cuhdrs_now))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub subject_id: String,
    pub predicted_end: f64,
    pub delta_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedSubject {
    pub rank: usize,
    pub subject_id: String,
    pub predicted_end: f64,
    pub delta_hat: f64,
    pub recruited: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecruitmentList {
    pub entries: Vec<RankedSubject>,
    pub trial_size: usize,
    pub horizon_years: f64,
}

impl RecruitmentList {
    pub fn recruited(&self) -> impl Iterator<Item = &RankedSubject> {
        self.entries.iter().filter(|e| e.recruited)
    }
}

/// Numeric ids compare as numbers, anything else as strings.
fn id_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

fn rank_order(deltas: &[f64], ids: &[&str]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..deltas.len()).collect();
    idx.sort_by(|&i, &j| deltas[i].total_cmp(&deltas[j]).then_with(|| id_cmp(ids[i], ids[j])));
    idx
}

/// Ranks by ascending `delta_hat` (steepest predicted decline first), ties
/// broken by subject id, and recruits the first `trial_size`.
pub fn rank_and_recruit(predictions: &[Prediction], trial_size: usize, horizon_years: f64) -> Result<RecruitmentList> {
    if trial_size > predictions.len() {
        return Err(Error::TrialTooLarge {
            trial_size,
            candidates: predictions.len(),
        });
    }
    let deltas: Vec<f64> = predictions.iter().map(|p| p.delta_hat).collect();
    let ids: Vec<&str> = predictions.iter().map(|p| p.subject_id.as_str()).collect();
    let entries = rank_order(&deltas, &ids)
        .into_iter()
        .enumerate()
        .map(|(pos, i)| RankedSubject {
            rank: pos + 1,
            subject_id: predictions[i].subject_id.clone(),
            predicted_end: predictions[i].predicted_end,
            delta_hat: predictions[i].delta_hat,
            recruited: pos < trial_size,
        })
        .collect();
    Ok(RecruitmentList {
        entries,
        trial_size,
        horizon_years,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Agreement {
    pub agree_recruit: f64,
    pub agree_not: f64,
    pub only_first: f64,
    pub only_second: f64,
}

impl Agreement {
    pub fn total(&self) -> f64 {
        self.agree_recruit + self.agree_not + self.only_first + self.only_second
    }

    fn tally(first: &[bool], second: &[bool]) -> Self {
        let mut a = Agreement::default();
        for (&x, &y) in first.iter().zip(second) {
            match (x, y) {
                (true, true) => a.agree_recruit += 1.0,
                (false, false) => a.agree_not += 1.0,
                (true, false) => a.only_first += 1.0,
                (false, true) => a.only_second += 1.0,
            }
        }
        a
    }
}

/// Cross-tabulates two lists over the same candidates, matched by id.
pub fn agreement(first: &RecruitmentList, second: &RecruitmentList) -> Result<Agreement> {
    let mut a: Vec<(&str, bool)> = first.entries.iter().map(|e| (e.subject_id.as_str(), e.recruited)).collect();
    let mut b: Vec<(&str, bool)> = second.entries.iter().map(|e| (e.subject_id.as_str(), e.recruited)).collect();
    a.sort_by(|x, y| x.0.cmp(y.0));
    b.sort_by(|x, y| x.0.cmp(y.0));
    if a.len() != b.len() || a.iter().zip(&b).any(|(x, y)| x.0 != y.0) {
        return Err(Error::InvalidArgument("recruitment lists cover different candidates".into()));
    }
    let fa: Vec<bool> = a.iter().map(|x| x.1).collect();
    let fb: Vec<bool> = b.iter().map(|x| x.1).collect();
    Ok(Agreement::tally(&fa, &fb))
}

fn recruited_mask(deltas: &[f64], ids: &[&str], trial_size: usize) -> Vec<bool> {
    let mut mask = vec![false; deltas.len()];
    for &i in rank_order(deltas, ids).iter().take(trial_size) {
        mask[i] = true;
    }
    mask
}

/// Mean agreement over bootstrap resamples of the candidates. Predictions
/// are held fixed; each resample draws `n` candidates with replacement and
/// ranks them under both models.
pub fn bootstrap_agreement(
    first: &[Prediction],
    second: &[Prediction],
    trial_size: usize,
    resamples: usize,
    seed: u64,
) -> Result<Agreement> {
    let n = first.len();
    if second.len() != n || first.iter().zip(second).any(|(a, b)| a.subject_id != b.subject_id) {
        return Err(Error::InvalidArgument("prediction sets cover different candidates".into()));
    }
    if trial_size > n {
        return Err(Error::TrialTooLarge {
            trial_size,
            candidates: n,
        });
    }
    if resamples == 0 || n == 0 {
        return Ok(Agreement::default());
    }
    let draws: Vec<Agreement> = (0..resamples as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r);
            let pick: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let ids: Vec<&str> = pick.iter().map(|&i| first[i].subject_id.as_str()).collect();
            let da: Vec<f64> = pick.iter().map(|&i| first[i].delta_hat).collect();
            let db: Vec<f64> = pick.iter().map(|&i| second[i].delta_hat).collect();
            Agreement::tally(&recruited_mask(&da, &ids, trial_size), &recruited_mask(&db, &ids, trial_size))
        })
        .collect();
    let k = resamples as f64;
    Ok(draws.iter().fold(Agreement::default(), |acc, a| Agreement {
        agree_recruit: acc.agree_recruit + a.agree_recruit / k,
        agree_not: acc.agree_not + a.agree_not / k,
        only_first: acc.only_first + a.only_first / k,
        only_second: acc.only_second + a.only_second / k,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecruitmentConfig {
    pub imputation: ImputationConfig,
    pub horizon: f64,
    pub trial_size: usize,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for RecruitmentConfig {
    fn default() -> Self {
        Self {
            imputation: ImputationConfig {
                upper_cap: Some(DEFAULT_UPPER_CAP),
                ..ImputationConfig::default()
            },
            horizon: DEFAULT_HORIZON,
            trial_size: DEFAULT_TRIAL_SIZE,
            resamples: DEFAULT_RESAMPLES,
            seed: 2024,
        }
    }
}

/// One progression model and the recruitment it implies.
#[derive(Debug, Clone)]
pub struct ModelRecruitment {
    pub approach: Approach,
    pub times: Vec<DerivedTimes>,
    pub fit: RegressionFit,
    pub predictions: Vec<Prediction>,
    pub list: RecruitmentList,
}

#[derive(Debug, Clone)]
pub struct RecruitmentOutcome {
    pub extrapolated: ModelRecruitment,
    pub non_extrapolated: ModelRecruitment,
    /// Extrapolated list first.
    pub agreement: Agreement,
    pub bootstrap: Agreement,
}

fn model_recruitment(
    visits: &[SubjectVisits],
    derived: &[DerivedTimes],
    imputation: &ImputationConfig,
    config: &RecruitmentConfig,
) -> Result<ModelRecruitment> {
    let times = impute_times(visits, derived, imputation)?;
    let fit = fit_progression(visits, &times)?;
    let predictions = visits
        .iter()
        .zip(&times)
        .filter(|(_, t)| t.censored)
        .map(|(v, t)| {
            let state = RecruitmentState {
                time_end: t.time_end,
                cuhdrs_now: v.cuhdrs_end,
                age: v.age_at_first_visit,
                cag: v.cag as f64,
            };
            let (predicted_end, delta_hat) = predict_change(&fit.coefficients, &state, config.horizon)?;
            Ok(Prediction {
                subject_id: v.subject_id.clone(),
                predicted_end,
                delta_hat,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let list = rank_and_recruit(&predictions, config.trial_size, config.horizon)?;
    Ok(ModelRecruitment {
        approach: imputation.approach,
        times,
        fit,
        predictions,
        list,
    })
}

/// Full pipeline under both imputation approaches. Candidates are the
/// subjects still undiagnosed at their last visit.
pub fn run_recruitment(visits: &[SubjectVisits], config: &RecruitmentConfig) -> Result<RecruitmentOutcome> {
    let derived = derive_times(visits)?;
    let ext_cfg = ImputationConfig {
        approach: Approach::Extrapolated,
        ..config.imputation
    };
    let non_cfg = ImputationConfig {
        approach: Approach::NonExtrapolated,
        ..config.imputation
    };
    let extrapolated = model_recruitment(visits, &derived, &ext_cfg, config)?;
    let non_extrapolated = model_recruitment(visits, &derived, &non_cfg, config)?;
    let agreement = agreement(&extrapolated.list, &non_extrapolated.list)?;
    let bootstrap = bootstrap_agreement(
        &extrapolated.predictions,
        &non_extrapolated.predictions,
        config.trial_size,
        config.resamples,
        config.seed,
    )?;
    Ok(RecruitmentOutcome {
        extrapolated,
        non_extrapolated,
        agreement,
        bootstrap,
    })
}

/// Parameters of the synthetic cohort. Diagnosis times are Weibull with
/// proportional hazards in centered AGE and CAG; final scores follow the
/// progression model at the true time to diagnosis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticCohortConfig {
    pub n: usize,
    pub seed: u64,
    pub theta: [f64; 7],
    pub sigma: f64,
    pub diagnosis_shape: f64,
    pub diagnosis_log_scale: f64,
    pub age_effect: f64,
    pub cag_effect: f64,
}

impl Default for SyntheticCohortConfig {
    fn default() -> Self {
        Self {
            n: 970,
            seed: 970,
            theta: [21.68, 0.084, 1.048, -0.024, -0.021, -0.089, 0.006],
            sigma: 1.5,
            diagnosis_shape: 1.8,
            diagnosis_log_scale: 3.82,
            age_effect: 0.02,
            cag_effect: 0.12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCohort {
    pub visits: Vec<SubjectVisits>,
    /// True time from first visit to diagnosis, also for censored subjects.
    pub true_time_start: Vec<f64>,
}

/// PREDICT-HD-shaped synthetic cohort (about a quarter diagnosed by the
/// last visit).
pub fn synthetic_cohort(config: &SyntheticCohortConfig) -> Result<SyntheticCohort> {
    let err = |e: &dyn std::fmt::Display| Error::InvalidArgument(e.to_string());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let age_dist = Normal::new(40.0, 10.0).map_err(|e| err(&e))?;
    let cag_dist = Normal::new(42.0, 2.5).map_err(|e| err(&e))?;
    let score_dist = Normal::new(17.0, 2.0).map_err(|e| err(&e))?;
    let noise = Normal::new(0.0, config.sigma).map_err(|e| err(&e))?;
    let follow_up_days = Uniform::new_inclusive(365u64, 12 * 365).map_err(|e| err(&e))?;
    let entry_days = Uniform::new(0u64, 5 * 365).map_err(|e| err(&e))?;
    let origin = NaiveDate::from_ymd_opt(2002, 1, 1).expect("valid date");

    let mut visits = Vec::with_capacity(config.n);
    let mut true_time_start = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let age: f64 = age_dist.sample(&mut rng);
        let age = age.clamp(18.0, 75.0);
        let cag: f64 = cag_dist.sample(&mut rng);
        let cag = cag.round().clamp(36.0, 55.0);
        let first = origin + Days::new(entry_days.sample(&mut rng));
        let last = first + Days::new(follow_up_days.sample(&mut rng));
        let follow_up = years_between(first, last);
        let scale = (config.diagnosis_log_scale
            - config.age_effect * (age - AGE_CENTER)
            - config.cag_effect * (cag - CAG_CENTER))
            .exp();
        let u: f64 = rng.random();
        let t = scale * (-(1.0 - u).ln()).powf(1.0 / config.diagnosis_shape);
        let t_days = ((t * DAYS_PER_YEAR).round() as u64).max(1);
        let diagnosis = (t <= follow_up).then(|| first + Days::new(t_days)).filter(|d| *d <= last);
        let time_start = match diagnosis {
            Some(d) => years_between(first, d),
            None => t,
        };
        let start = score_dist.sample(&mut rng);
        let row = progression_row(time_start - follow_up, start, age, cag);
        let mean: f64 = row.iter().zip(&config.theta).map(|(x, b)| x * b).sum();
        visits.push(SubjectVisits {
            subject_id: format!("{:04}", i + 1),
            first_visit_date: first,
            last_visit_date: last,
            diagnosis_date: diagnosis,
            age_at_first_visit: age,
            cag: cag as u32,
            cuhdrs_start: start,
            cuhdrs_end: mean + noise.sample(&mut rng),
        });
        true_time_start.push(time_start);
    }
    Ok(SyntheticCohort { visits, true_time_start })
}
