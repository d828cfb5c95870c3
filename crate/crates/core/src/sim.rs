//! Monte Carlo harness: synthetic data with a right-censored covariate, the
//! full-cohort fit and both imputation approaches, aggregated over
//! replicates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Exp, LogNormal, Normal, Weibull};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::Interpolation;
use crate::data::CensoredRecord;
use crate::error::{Error, Result};
use crate::imputation::{impute_dataset, Approach, ImputationConfig, TrapezoidHeights};
use crate::regression::fit_ols;
use crate::tail::ExtensionKind;

pub const PARAMETERS: [&str; 3] = ["alpha", "beta", "gamma"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XFamily {
    Weibull,
    #[serde(alias = "log-normal")]
    Lognormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CensoringLevel {
    Light,
    Heavy,
    #[serde(alias = "extraheavy")]
    ExtraHeavy,
}

impl CensoringLevel {
    pub const ALL: [CensoringLevel; 3] = [CensoringLevel::Light, CensoringLevel::Heavy, CensoringLevel::ExtraHeavy];

    /// Exponential censoring rate giving roughly 17/49/82% (Weibull) or
    /// 20/35/80% (log-normal) censoring.
    pub fn rate(self, family: XFamily) -> f64 {
        match (family, self) {
            (XFamily::Weibull, CensoringLevel::Light) => 0.5,
            (XFamily::Weibull, CensoringLevel::Heavy) => 2.9,
            (XFamily::Weibull, CensoringLevel::ExtraHeavy) => 20.0,
            (XFamily::Lognormal, CensoringLevel::Light) => 0.2,
            (XFamily::Lognormal, CensoringLevel::Heavy) => 0.4,
            (XFamily::Lognormal, CensoringLevel::ExtraHeavy) => 1.67,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CensoringLevel::Light => "light",
            CensoringLevel::Heavy => "heavy",
            CensoringLevel::ExtraHeavy => "extraheavy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    pub x_family: XFamily,
    pub weibull_shape: f64,
    /// Weibull scale is `weibull_scale_base + weibull_scale_z * z`, with
    /// `S(x) = exp(-(x / scale)^shape)`.
    pub weibull_scale_base: f64,
    pub weibull_scale_z: f64,
    /// Log-normal X has log-mean `lognormal_mean_z * z` and log-variance
    /// `lognormal_var`.
    pub lognormal_mean_z: f64,
    pub lognormal_var: f64,
    pub censor_rate: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub replicates: usize,
    pub seed: u64,
    pub extension: ExtensionKind,
    pub interpolation: Interpolation,
    pub trapezoid_heights: TrapezoidHeights,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n: 500,
            x_family: XFamily::Weibull,
            weibull_shape: 0.75,
            weibull_scale_base: 0.25,
            weibull_scale_z: 0.25,
            lognormal_mean_z: 0.05,
            lognormal_var: 0.25,
            censor_rate: 0.5,
            alpha: 1.0,
            beta: 0.5,
            gamma: 0.25,
            sigma: 1.0,
            replicates: 200,
            seed: 20240611,
            extension: ExtensionKind::Weibull,
            interpolation: Interpolation::CarryForward,
            trapezoid_heights: TrapezoidHeights::KnotOwner,
        }
    }
}

impl ScenarioConfig {
    pub fn new(family: XFamily, level: CensoringLevel, n: usize) -> Self {
        Self {
            n,
            x_family: family,
            censor_rate: level.rate(family),
            ..Self::default()
        }
    }

    /// Parses names like `weibull-extraheavy-n500` or `lognormal-light-n1000`.
    pub fn named(name: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown scenario `{name}` (expected e.g. weibull-heavy-n500)"));
        let parts: Vec<&str> = name.split('-').collect();
        let (family, level, n) = match parts.as_slice() {
            [f, l, n] => (*f, *l, *n),
            [f, "extra", "heavy", n] => (*f, "extraheavy", *n),
            _ => return Err(bad()),
        };
        let family = match family {
            "weibull" => XFamily::Weibull,
            "lognormal" => XFamily::Lognormal,
            _ => return Err(bad()),
        };
        let level = match level {
            "light" => CensoringLevel::Light,
            "heavy" => CensoringLevel::Heavy,
            "extraheavy" => CensoringLevel::ExtraHeavy,
            _ => return Err(bad()),
        };
        let n = n.strip_prefix('n').and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        Ok(Self::new(family, level, n))
    }

    pub fn truth(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("weibull_shape", self.weibull_shape),
            ("weibull_scale_base", self.weibull_scale_base),
            ("lognormal_var", self.lognormal_var),
            ("censor_rate", self.censor_rate),
            ("sigma", self.sigma),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.weibull_scale_base + self.weibull_scale_z > 0.0) {
            return Err(Error::InvalidArgument("Weibull scale at z = 1 must be positive".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be at least 1".into()));
        }
        if self.n < 4 {
            return Err(Error::InvalidArgument(format!("n = {} is too small", self.n)));
        }
        Ok(())
    }

    fn arm(&self, approach: Approach) -> ImputationConfig {
        ImputationConfig {
            approach,
            extension: self.extension,
            interpolation: self.interpolation,
            trapezoid_heights: self.trapezoid_heights,
            ..ImputationConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset {
    pub records: Vec<CensoredRecord>,
    /// Uncensored covariate values, for the full-cohort fit.
    pub x_true: Vec<f64>,
}

/// Replicate `replicate_index` of the scenario. Each replicate has its own
/// ChaCha stream, so results do not depend on evaluation order.
pub fn generate_dataset(config: &ScenarioConfig, replicate_index: u64) -> Result<SimDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(replicate_index);
    let coin = Bernoulli::new(0.5).expect("valid probability");
    let censor = Exp::new(config.censor_rate).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let noise = Normal::new(0.0, config.sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let weibull = |z: f64| Weibull::new(config.weibull_scale_base + config.weibull_scale_z * z, config.weibull_shape);
    let lognormal = |z: f64| LogNormal::new(config.lognormal_mean_z * z, config.lognormal_var.sqrt());

    let mut records = Vec::with_capacity(config.n);
    let mut x_true = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let z = if coin.sample(&mut rng) { 1.0 } else { 0.0 };
        let x = match config.x_family {
            XFamily::Weibull => weibull(z).map_err(|e| Error::InvalidArgument(e.to_string()))?.sample(&mut rng),
            XFamily::Lognormal => lognormal(z).map_err(|e| Error::InvalidArgument(e.to_string()))?.sample(&mut rng),
        };
        let c: f64 = censor.sample(&mut rng);
        let y = config.alpha + config.beta * x + config.gamma * z + noise.sample(&mut rng);
        records.push(CensoredRecord::new(y, x.min(c), x <= c, vec![z]));
        x_true.push(x);
    }
    Ok(SimDataset { records, x_true })
}

/// Estimates from one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub full: [f64; 3],
    /// One entry per imputation arm, in the order requested.
    pub arms: Vec<std::result::Result<ArmEstimate, Error>>,
    pub censored_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmEstimate {
    pub coefficients: [f64; 3],
    pub used_fallback: bool,
}

fn ols3(y: &[f64], x: &[f64], z: &[f64]) -> Result<[f64; 3]> {
    let rows: Vec<[f64; 3]> = x.iter().zip(z).map(|(&x, &z)| [1.0, x, z]).collect();
    let fit = fit_ols(y, &rows)?;
    Ok([fit.coefficients[0], fit.coefficients[1], fit.coefficients[2]])
}

fn run_arm(records: &[CensoredRecord], arm: &ImputationConfig) -> Result<ArmEstimate> {
    let imputed = impute_dataset(records, arm)?;
    let y: Vec<f64> = imputed.records.iter().map(|r| r.y).collect();
    let x: Vec<f64> = imputed.records.iter().map(|r| r.w).collect();
    let z: Vec<f64> = imputed.records.iter().map(|r| r.z[0]).collect();
    Ok(ArmEstimate {
        coefficients: ols3(&y, &x, &z)?,
        used_fallback: imputed.used_fallback(),
    })
}

pub fn run_replicate(config: &ScenarioConfig, index: u64, arms: &[ImputationConfig]) -> Result<ReplicateOutcome> {
    let data = generate_dataset(config, index)?;
    let y: Vec<f64> = data.records.iter().map(|r| r.y).collect();
    let z: Vec<f64> = data.records.iter().map(|r| r.z[0]).collect();
    let full = ols3(&y, &data.x_true, &z)?;
    let arms = arms.iter().map(|a| run_arm(&data.records, a)).collect();
    Ok(ReplicateOutcome {
        full,
        arms,
        censored_fraction: crate::data::censoring_fraction(&data.records),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParameterSummary {
    pub mean: f64,
    pub bias: f64,
    pub percent_bias: f64,
    /// `None` with a single replicate.
    pub se: Option<f64>,
    pub relative_efficiency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub parameters: [ParameterSummary; 3],
    pub replicates_used: usize,
}

fn mean_var(v: &[f64]) -> (f64, Option<f64>) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, None);
    }
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    (m, Some(ss / (n - 1.0)))
}

/// Bias, SE and relative efficiency against paired full-cohort estimates.
pub fn summarize_method(method: &str, estimates: &[[f64; 3]], full: &[[f64; 3]], truth: [f64; 3]) -> MethodSummary {
    debug_assert_eq!(estimates.len(), full.len());
    let parameters = std::array::from_fn(|j| {
        let col: Vec<f64> = estimates.iter().map(|e| e[j]).collect();
        let full_col: Vec<f64> = full.iter().map(|e| e[j]).collect();
        let (mean, var) = mean_var(&col);
        let (_, full_var) = mean_var(&full_col);
        let bias = mean - truth[j];
        ParameterSummary {
            mean,
            bias,
            percent_bias: 100.0 * bias / truth[j],
            se: var.map(f64::sqrt),
            relative_efficiency: match (full_var, var) {
                (Some(f), Some(v)) if v > 0.0 => Some(f / v),
                _ => None,
            },
        }
    });
    MethodSummary {
        method: method.to_string(),
        parameters,
        replicates_used: estimates.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub config: ScenarioConfig,
    pub full_cohort: MethodSummary,
    pub extrapolated: MethodSummary,
    pub non_extrapolated: MethodSummary,
    pub censor_rate_observed: f64,
    /// Share of replicates whose extension fit converged without falling
    /// back to the exponential tie-in.
    pub extension_convergence_rate: f64,
    pub failed_replicates: usize,
}

impl SimulationSummary {
    pub fn methods(&self) -> [&MethodSummary; 3] {
        [&self.full_cohort, &self.extrapolated, &self.non_extrapolated]
    }
}

fn run_all(config: &ScenarioConfig, arms: &[ImputationConfig]) -> Result<Vec<Result<ReplicateOutcome>>> {
    config.validate()?;
    Ok((0..config.replicates as u64)
        .into_par_iter()
        .map(|i| run_replicate(config, i, arms))
        .collect())
}

/// Runs every replicate (in parallel) and aggregates in replicate order.
/// Replicates where any analysis fails are left out of every summary.
pub fn run_scenario(config: &ScenarioConfig) -> Result<SimulationSummary> {
    let arms = [config.arm(Approach::Extrapolated), config.arm(Approach::NonExtrapolated)];
    let outcomes = run_all(config, &arms)?;

    let mut full = Vec::new();
    let mut ext = Vec::new();
    let mut non = Vec::new();
    let mut censored = Vec::new();
    let mut fallbacks = 0usize;
    let mut first_error = None;
    for o in outcomes {
        let o = match o {
            Ok(o) => o,
            Err(e) => {
                first_error.get_or_insert(e);
                continue;
            }
        };
        match (&o.arms[0], &o.arms[1]) {
            (Ok(e), Ok(n)) => {
                full.push(o.full);
                ext.push(e.coefficients);
                non.push(n.coefficients);
                censored.push(o.censored_fraction);
                fallbacks += e.used_fallback as usize;
            }
            (Err(e), _) | (_, Err(e)) => {
                first_error.get_or_insert(e.clone());
            }
        }
    }
    if full.is_empty() {
        let why = first_error.map_or_else(|| "no replicates".to_string(), |e| e.to_string());
        return Err(Error::ScenarioFailed(why));
    }
    let truth = config.truth();
    let used = full.len();
    Ok(SimulationSummary {
        config: config.clone(),
        full_cohort: summarize_method("full_cohort", &full, &full, truth),
        extrapolated: summarize_method("extrapolated", &ext, &full, truth),
        non_extrapolated: summarize_method("non_extrapolated", &non, &full, truth),
        censor_rate_observed: censored.iter().sum::<f64>() / used as f64,
        extension_convergence_rate: 1.0 - fallbacks as f64 / used as f64,
        failed_replicates: config.replicates - used,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtensionStudyRow {
    pub extension: ExtensionKind,
    pub interpolation: Interpolation,
    /// `None` if the combination failed in every replicate.
    pub summary: Option<MethodSummary>,
    pub failed_replicates: usize,
    pub fallback_replicates: usize,
    pub first_error: Option<String>,
}

/// Extrapolated approach under every extension and interpolation choice,
/// on shared replicates. Carry-forward needs a finite `upper_cap`, otherwise
/// its rows report the divergence.
pub fn run_extension_study(config: &ScenarioConfig, upper_cap: Option<f64>) -> Result<Vec<ExtensionStudyRow>> {
    let combos: Vec<(ExtensionKind, Interpolation)> = ExtensionKind::ALL
        .iter()
        .flat_map(|&k| [Interpolation::CarryForward, Interpolation::Mean].map(|i| (k, i)))
        .collect();
    let arms: Vec<ImputationConfig> = combos
        .iter()
        .map(|&(extension, interpolation)| ImputationConfig {
            extension,
            interpolation,
            upper_cap,
            ..config.arm(Approach::Extrapolated)
        })
        .collect();
    let outcomes: Vec<ReplicateOutcome> = run_all(config, &arms)?.into_iter().filter_map(|o| o.ok()).collect();
    if outcomes.is_empty() {
        return Err(Error::ScenarioFailed("every replicate failed to generate or fit".into()));
    }
    let truth = config.truth();
    Ok(combos
        .iter()
        .enumerate()
        .map(|(a, &(extension, interpolation))| {
            let mut full = Vec::new();
            let mut est = Vec::new();
            let mut fallback = 0;
            let mut first_error = None;
            for o in &outcomes {
                match &o.arms[a] {
                    Ok(e) => {
                        full.push(o.full);
                        est.push(e.coefficients);
                        fallback += e.used_fallback as usize;
                    }
                    Err(e) => {
                        first_error.get_or_insert_with(|| e.to_string());
                    }
                }
            }
            let name = format!("{}/{}", extension.name(), interpolation.name());
            ExtensionStudyRow {
                extension,
                interpolation,
                summary: (!est.is_empty()).then(|| summarize_method(&name, &est, &full, truth)),
                failed_replicates: config.replicates - est.len(),
                fallback_replicates: fallback,
                first_error,
            }
        })
        .collect())
}
