//! Effective run settings: command-line flags over an optional TOML file
//! over built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use cmi_core::imputation::{Approach, TrapezoidHeights};
use cmi_core::{ExtensionKind, Interpolation};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Parses an enum flag through its serde (kebab-case) name.
pub fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Every setting that can come from a flag or from the config file.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Input table (CSV with a header row).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output table; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// extrapolated or non-extrapolated.
    #[arg(long, value_parser = parse_enum::<Approach>)]
    pub approach: Option<Approach>,
    /// weibull, exponential, drop-off or carry-forward.
    #[arg(long, value_parser = parse_enum::<ExtensionKind>)]
    pub extension: Option<ExtensionKind>,
    /// carry-forward or mean.
    #[arg(long, value_parser = parse_enum::<Interpolation>)]
    pub interpolation: Option<Interpolation>,
    /// Trapezoid heights for the non-extrapolated approach: subject or knot-owner.
    #[arg(long, value_parser = parse_enum::<TrapezoidHeights>)]
    pub trapezoid_heights: Option<TrapezoidHeights>,
    /// Finite integration horizon, in the units of w (years for recruit).
    #[arg(long, value_name = "YEARS")]
    pub upper_cap: Option<f64>,
    /// Treat the largest censored w as an event (defaults to on only for the
    /// non-extrapolated approach without covariates).
    #[arg(long)]
    pub treat_max_as_event: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Scenario name such as weibull-extraheavy-n500.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Overrides the sample size implied by the scenario name.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub trial_size: Option<usize>,
    /// Trial length.
    #[arg(long, value_name = "YEARS")]
    pub horizon: Option<f64>,
    /// Bootstrap resamples for the recruitment agreement.
    #[arg(long)]
    pub resamples: Option<usize>,
    /// Where recruit writes the agreement table.
    #[arg(long)]
    pub agreement_output: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($field:ident),*) => {
        Settings { $($field: $top.$field.or($base.$field)),* }
    };
}

impl Settings {
    /// `self` wins wherever it is set.
    pub fn over(self, base: Settings) -> Settings {
        let top = self;
        overlay!(
            base,
            top,
            input,
            output,
            approach,
            extension,
            interpolation,
            trapezoid_heights,
            upper_cap,
            treat_max_as_event,
            seed,
            replicates,
            scenario,
            n,
            trial_size,
            horizon,
            resamples,
            agreement_output
        )
    }

    pub fn load(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| crate::io::ParseError::new(path, None, e.to_string()).into())
    }
}

/// Effective values echoed into the output manifest.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub settings: T,
}

impl<T: Serialize> Manifest<T> {
    pub fn new(command: &'static str, input: Option<&Path>, settings: T) -> Self {
        Self {
            tool: "cmi",
            version: env!("CARGO_PKG_VERSION"),
            command,
            input: input.map(|p| p.display().to_string()),
            settings,
        }
    }

    pub fn line(&self) -> String {
        format!("# manifest: {}", serde_json::to_string(self).expect("manifest serializes"))
    }
}
