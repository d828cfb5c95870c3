use std::path::{Path, PathBuf};

use anyhow::Result;
use cmi_core::imputation::{Approach, ImputationConfig};
use cmi_core::recruitment::{
    run_recruitment, synthetic_cohort, Agreement, ModelRecruitment, RecruitmentConfig, SyntheticCohortConfig,
};
use cmi_core::sim::{run_extension_study, run_scenario, MethodSummary, ScenarioConfig, PARAMETERS};
use log::{info, warn};
use serde::Serialize;

use crate::config::{Manifest, Settings};
use crate::io::{opt_real, read_records, read_visits, real, Output, Table};

/// Missing or contradictory settings. Maps to exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn imputation_config(s: &Settings, default_cap: Option<f64>) -> ImputationConfig {
    let base = ImputationConfig::default();
    ImputationConfig {
        approach: s.approach.unwrap_or(base.approach),
        extension: s.extension.unwrap_or(base.extension),
        interpolation: s.interpolation.unwrap_or(base.interpolation),
        trapezoid_heights: s.trapezoid_heights.unwrap_or(base.trapezoid_heights),
        upper_cap: s.upper_cap.or(default_cap),
        treat_max_as_event: s.treat_max_as_event,
        ..base
    }
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn impute(s: &Settings) -> Result<()> {
    let input = s
        .input
        .as_deref()
        .ok_or_else(|| UsageError("impute needs --input".into()))?;
    let config = imputation_config(s, None);
    let table = Table::read(input)?;
    let records = read_records(&table)?;
    let manifest = Manifest::new("impute", Some(input), &config).line();

    let mut header = table.header.clone();
    header.extend(["imputed", "conditional_mean", "survival_at_w", "extension_fallback"].map(String::from));
    let mut out = Output::create(s.output.as_deref(), &manifest)?;
    out.row(&header)?;
    if records.is_empty() {
        warn!("{} has a header but no rows; nothing to impute", input.display());
        return out.finish();
    }

    let result = cmi_core::impute_dataset(&records, &config)?;
    let w_col = table.column("w")?;
    for ((row, rec), d) in table.rows.iter().zip(&result.records).zip(&result.diagnostics) {
        let mut fields = row.clone();
        if d.imputed {
            fields[w_col] = real(rec.w);
        }
        fields.extend([
            flag(d.imputed).to_string(),
            opt_real(d.conditional_mean),
            opt_real(d.survival_at_w),
            flag(d.used_fallback_extension).to_string(),
        ]);
        out.row(&fields)?;
    }
    let failed = result.n_failed();
    if failed > 0 {
        let first = result.diagnostics.iter().find_map(|d| d.error.as_ref()).expect("a failure");
        warn!("{failed} censored records were left as observed; first cause: {first}");
    }
    if result.used_fallback() {
        warn!("Weibull tail fit did not converge; used the exponential tie-in");
    }
    info!("imputed {} of {} records", result.n_imputed(), records.len());
    out.finish()
}

fn scenario(s: &Settings) -> Result<ScenarioConfig> {
    let name = s.scenario.as_deref().unwrap_or("weibull-light-n500");
    let mut c = ScenarioConfig::named(name).map_err(|e| UsageError(e.to_string()))?;
    if let Some(n) = s.n {
        c.n = n;
    }
    if let Some(r) = s.replicates {
        c.replicates = r;
    }
    if let Some(seed) = s.seed {
        c.seed = seed;
    }
    if let Some(e) = s.extension {
        c.extension = e;
    }
    if let Some(i) = s.interpolation {
        c.interpolation = i;
    }
    if let Some(h) = s.trapezoid_heights {
        c.trapezoid_heights = h;
    }
    c.validate().map_err(|e| UsageError(e.to_string()))?;
    Ok(c)
}

const SUMMARY_COLUMNS: [&str; 6] = ["mean", "bias", "percent_bias", "se", "relative_efficiency", "replicates_used"];

fn summary_fields(m: &MethodSummary, j: usize) -> [String; 6] {
    let p = &m.parameters[j];
    [
        real(p.mean),
        real(p.bias),
        real(p.percent_bias),
        opt_real(p.se),
        opt_real(p.relative_efficiency),
        m.replicates_used.to_string(),
    ]
}

pub fn simulate(s: &Settings) -> Result<()> {
    let config = scenario(s)?;
    let summary = run_scenario(&config)?;
    let truth = config.truth();
    let mut out = Output::create(s.output.as_deref(), &Manifest::new("simulate", None, &config).line())?;
    out.row(["parameter", "method", "true_value"].into_iter().chain(SUMMARY_COLUMNS))?;
    for (j, name) in PARAMETERS.iter().enumerate() {
        for m in summary.methods() {
            let mut fields = vec![name.to_string(), m.method.clone(), real(truth[j])];
            fields.extend(summary_fields(m, j));
            out.row(&fields)?;
        }
    }
    out.comment(&format!("extension convergence rate: {}", real(summary.extension_convergence_rate)))?;
    out.comment(&format!("observed censoring: {}", real(summary.censor_rate_observed)))?;
    out.comment(&format!("failed replicates: {}", summary.failed_replicates))?;
    out.finish()
}

#[derive(Serialize)]
struct StudySettings<'a> {
    scenario: &'a ScenarioConfig,
    upper_cap: Option<f64>,
}

pub fn extend_study(s: &Settings) -> Result<()> {
    let config = scenario(s)?;
    let rows = run_extension_study(&config, s.upper_cap)?;
    let settings = StudySettings {
        scenario: &config,
        upper_cap: s.upper_cap,
    };
    let mut out = Output::create(s.output.as_deref(), &Manifest::new("extend-study", None, settings).line())?;
    out.row(
        ["extension", "interpolation", "parameter"]
            .into_iter()
            .chain(SUMMARY_COLUMNS)
            .chain(["failed_replicates", "fallback_replicates", "error"]),
    )?;
    for row in &rows {
        for (j, name) in PARAMETERS.iter().enumerate() {
            let mut fields = vec![row.extension.name().to_string(), row.interpolation.name().to_string(), name.to_string()];
            match &row.summary {
                Some(m) => fields.extend(summary_fields(m, j)),
                None => fields.extend(std::iter::repeat_n(String::new(), 5).chain(["0".to_string()])),
            }
            fields.extend([
                row.failed_replicates.to_string(),
                row.fallback_replicates.to_string(),
                row.first_error.clone().unwrap_or_default(),
            ]);
            out.row(&fields)?;
        }
    }
    out.finish()
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum CohortSource<'a> {
    File(&'a Path),
    Synthetic(&'a SyntheticCohortConfig),
}

#[derive(Serialize)]
struct RecruitSettings<'a> {
    cohort: CohortSource<'a>,
    recruitment: &'a RecruitmentConfig,
}

fn agreement_path(s: &Settings) -> Option<PathBuf> {
    if let Some(p) = &s.agreement_output {
        return Some(p.clone());
    }
    let out = s.output.as_ref()?;
    let stem = out.file_stem()?.to_string_lossy();
    Some(out.with_file_name(format!("{stem}.agreement.csv")))
}

fn agreement_fields(label: &str, a: &Agreement) -> [String; 6] {
    [
        label.to_string(),
        real(a.agree_recruit),
        real(a.agree_not),
        real(a.only_first),
        real(a.only_second),
        real(a.total()),
    ]
}

const AGREEMENT_COLUMNS: [&str; 6] = [
    "statistic",
    "both_recruit",
    "neither_recruit",
    "extrapolated_only",
    "non_extrapolated_only",
    "total",
];

pub fn recruit(s: &Settings) -> Result<()> {
    let defaults = RecruitmentConfig::default();
    let config = RecruitmentConfig {
        imputation: imputation_config(s, defaults.imputation.upper_cap),
        horizon: s.horizon.unwrap_or(defaults.horizon),
        trial_size: s.trial_size.unwrap_or(defaults.trial_size),
        resamples: s.resamples.unwrap_or(defaults.resamples),
        seed: s.seed.unwrap_or(defaults.seed),
    };
    if s.approach.is_some() {
        warn!("--approach is ignored by recruit, which always compares both approaches");
    }
    let synthetic = SyntheticCohortConfig {
        n: s.n.unwrap_or(SyntheticCohortConfig::default().n),
        seed: s.seed.unwrap_or(SyntheticCohortConfig::default().seed),
        ..SyntheticCohortConfig::default()
    };
    let (visits, source) = match s.input.as_deref() {
        Some(path) => (read_visits(&Table::read(path)?)?, CohortSource::File(path)),
        None => {
            info!("no --input; using a synthetic cohort of {} subjects", synthetic.n);
            (synthetic_cohort(&synthetic)?.visits, CohortSource::Synthetic(&synthetic))
        }
    };
    let outcome = run_recruitment(&visits, &config)?;
    let manifest = Manifest::new(
        "recruit",
        None,
        RecruitSettings {
            cohort: source,
            recruitment: &config,
        },
    )
    .line();

    let mut out = Output::create(s.output.as_deref(), &manifest)?;
    out.row(["approach", "rank", "subject_id", "predicted_end", "delta_hat", "recruited"])?;
    let models: [(&str, &ModelRecruitment); 2] = [
        ("extrapolated", &outcome.extrapolated),
        ("non-extrapolated", &outcome.non_extrapolated),
    ];
    for (name, m) in models {
        debug_assert_eq!(m.approach == Approach::Extrapolated, name == "extrapolated");
        for e in &m.list.entries {
            out.row([
                name.to_string(),
                e.rank.to_string(),
                e.subject_id.clone(),
                real(e.predicted_end),
                real(e.delta_hat),
                flag(e.recruited).to_string(),
            ])?;
        }
    }

    let observed = agreement_fields("observed", &outcome.agreement);
    let boot = agreement_fields("bootstrap_mean", &outcome.bootstrap);
    match agreement_path(s) {
        Some(path) => {
            out.finish()?;
            let mut agr = Output::create(Some(&path), &manifest)?;
            agr.row(AGREEMENT_COLUMNS)?;
            agr.row(&observed)?;
            agr.row(&boot)?;
            agr.finish()?;
            info!("agreement written to {}", path.display());
        }
        None => {
            out.comment(&AGREEMENT_COLUMNS.join(","))?;
            out.comment(&observed.join(","))?;
            out.comment(&boot.join(","))?;
            out.finish()?;
        }
    }
    Ok(())
}
