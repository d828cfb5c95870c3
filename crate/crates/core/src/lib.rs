//! Conditional mean imputation for a right-censored covariate in linear
//! regression, using a Cox model for the covariate's survival curve and
//! parametric extensions past the largest uncensored value.

pub mod baseline;
pub mod cox;
pub mod curve;
pub mod data;
pub mod error;
pub mod imputation;
pub mod quadrature;
pub mod recruitment;
pub mod regression;
pub mod sim;
pub mod special;
pub mod tail;

pub use baseline::{breslow_baseline, BaselineSurvival, Interpolation};
pub use cox::{fit_cox, CoxFit};
pub use curve::{eval_survival, SurvivalCurve};
pub use data::{censoring_fraction, validate_records, CensoredRecord};
pub use error::{Error, Result};
pub use imputation::{
    conditional_mean, impute_dataset, Approach, ImputationConfig, ImputedDataset, RecordDiagnostics,
    TrapezoidHeights,
};
pub use quadrature::{integrate_survival, trapezoid_over_knots, IntegralResult, IntegrationMethod};
pub use recruitment::{
    cuhdrs, derive_times, fit_progression, impute_times, predict_change, rank_and_recruit, run_recruitment,
    RecruitmentConfig, RecruitmentList, SubjectVisits,
};
pub use regression::{fit_ols, sandwich_cov, wald_ci, RegressionFit, SandwichFlavor};
pub use sim::{generate_dataset, run_extension_study, run_scenario, ScenarioConfig, SimulationSummary};
pub use tail::{fit_extension, fit_extension_with_fallback, ExtensionKind, TailExtension};
