use thiserror::Error;

/// Errors raised by the survival, imputation and regression routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid record {index}: {reason}")]
    InvalidRecord { index: usize, reason: String },

    #[error("dataset is empty")]
    EmptyData,

    #[error("no uncensored observations")]
    NoEvents,

    #[error("information matrix is singular (covariate column {column})")]
    SingularInformation { column: usize },

    #[error("Newton-Raphson did not converge after {iterations} iterations (gradient max-norm {gradient:e})")]
    NotConverged { iterations: usize, gradient: f64 },

    #[error("partial likelihood is monotone (linear predictor reaches {max_linear_predictor:.1}); hazard ratios are not finite")]
    Separated { max_linear_predictor: f64 },

    #[error("covariate vector has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("tail extension undefined: baseline survival at the largest event time is {survival}")]
    DegenerateTail { survival: f64 },

    #[error("Weibull tail likelihood has no interior maximum (shape {shape})")]
    NonConvergence { shape: f64 },

    #[error("extension evaluated at t = {t} which is not beyond the largest event time {x_tilde}")]
    OutOfRange { t: f64, x_tilde: f64 },

    #[error("integral to infinity diverges under a carry-forward tail")]
    Divergent,

    #[error("survival at w = {w} is zero; conditional mean undefined")]
    ZeroSurvival { w: f64 },

    #[error("no survival mass beyond w = {w}; imputed value would equal w")]
    EmptyTail { w: f64 },

    #[error("design matrix is rank deficient at column {column}")]
    RankDeficient { column: usize },

    #[error("{rows} rows is too few for {columns} columns")]
    TooFewRows { rows: usize, columns: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid dates for subject {subject}: {reason}")]
    InvalidDates { subject: String, reason: String },

    #[error("missing covariate: {0}")]
    MissingCovariate(String),

    #[error("trial size {trial_size} exceeds the {candidates} candidates")]
    TrialTooLarge { trial_size: usize, candidates: usize },

    #[error("every replicate failed; first error: {0}")]
    ScenarioFailed(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
