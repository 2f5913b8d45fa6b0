//! TOML run configuration.
//!
//! ```toml
//! schema_version = 1
//!
//! [grid]
//! points = [64, 64]
//! extent = [3150.0, 3150.0]
//!
//! [medium.preset]
//! kind = "marmousi"
//! seed = 7
//!
//! [source]
//! epicenter = [0.0, 0.0]
//! amplitude = 1.0
//! kernel_radius = 150.0
//! wavelet = { kind = "ricker", peak_frequency = 5.0 }
//!
//! [sim]
//! duration = 2.5
//! boundary = { kind = "sponge", width = 8, strength = 3.0 }
//!
//! [[interrogators]]
//! id = "west"
//! position = [-800.0, 0.0]
//!
//! [acquisition]
//! rate = 100.0
//! ```
//!
//! Optional `[dataset]` and `[harness]` tables drive `dataset generate` and
//! supply model parameters to `eval`.

use std::path::Path;

use serde::Deserialize;

use awsim_core::acquisition::{effective_config, Interrogator};
use awsim_core::dataset::{DatasetSpec, Ranges};
use awsim_core::harness::{InputMode, ModelKind};
use awsim_core::{Error, Grid, MediumSpec, SimConfig, SourceSpec, SpeedField, Wavelet};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub grid: Grid,
    pub medium: MediumSpec,
    pub source: SourceTable,
    pub sim: SimConfig,
    #[serde(default)]
    pub interrogators: Vec<Interrogator>,
    pub acquisition: Acquisition,
    #[serde(default)]
    pub dataset: Option<DatasetSection>,
    #[serde(default)]
    pub harness: Option<HarnessSection>,
}

/// Source parameters; omitted entries fall back to a centered unit-amplitude
/// 5 Hz Ricker with a kernel radius of three grid spacings.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceTable {
    #[serde(default)]
    pub epicenter: Option<Vec<f64>>,
    #[serde(default = "unit")]
    pub amplitude: f64,
    #[serde(default)]
    pub kernel_radius: Option<f64>,
    #[serde(default = "default_wavelet")]
    pub wavelet: Wavelet,
}

fn unit() -> f64 {
    1.0
}

fn default_wavelet() -> Wavelet {
    Wavelet::ricker(5.0)
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Acquisition {
    /// Output sampling rate in Hz.
    pub rate: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub splits: Vec<Split>,
    #[serde(default)]
    pub ranges: Ranges,
    #[serde(default)]
    pub epicenter_margin: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    pub name: String,
    pub count: u64,
    pub master_seed: u64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessSection {
    #[serde(default)]
    pub models: Vec<ModelKind>,
    #[serde(default)]
    pub input_mode: Option<InputMode>,
}

/// Failure while loading a configuration; always reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<Error> for ConfigError {
    fn from(e: Error) -> Self {
        ConfigError(e.to_string())
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string().trim_end().to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(ConfigError(format!(
                "invalid configuration at `schema_version`: expected {SCHEMA_VERSION}, got {}",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    pub fn source(&self) -> SourceSpec {
        SourceSpec {
            epicenter: self.source.epicenter.clone().unwrap_or_else(|| vec![0.0; self.grid.ndim()]),
            amplitude: self.source.amplitude,
            kernel_radius: self.source.kernel_radius.unwrap_or(3.0 * self.grid.max_spacing()),
            wavelet: self.source.wavelet,
        }
    }

    /// Checks everything a single simulation needs and returns the built
    /// medium and the effective solver settings.
    pub fn validate_simulation(&self) -> Result<(SpeedField, SimConfig), ConfigError> {
        let medium = self.medium.build(&self.grid)?;
        let source = self.source();
        source.validate(&self.grid)?;
        source.wavelet.validate()?;
        if self.interrogators.is_empty() {
            return Err(ConfigError::from(Error::config("interrogators", "at least one interrogator required")));
        }
        for (i, p) in self.interrogators.iter().enumerate() {
            p.validate(&self.grid, &format!("interrogators[{i}]"))?;
        }
        if !(self.acquisition.rate > 0.0 && self.acquisition.rate.is_finite()) {
            return Err(ConfigError::from(Error::config("acquisition.rate", "must be positive")));
        }
        self.sim.validate(&self.grid)?;
        let sim = effective_config(&self.sim, &self.grid, &medium, self.acquisition.rate)?;
        Ok((medium, sim))
    }

    /// Dataset specs for every split, validated.
    pub fn dataset_specs(&self) -> Result<Vec<DatasetSpec>, ConfigError> {
        let section = self
            .dataset
            .as_ref()
            .ok_or_else(|| ConfigError::from(Error::config("dataset", "missing [dataset] table")))?;
        if section.splits.is_empty() {
            return Err(ConfigError::from(Error::config("dataset.splits", "at least one split required")));
        }
        let mut names = std::collections::BTreeSet::new();
        section
            .splits
            .iter()
            .enumerate()
            .map(|(i, split)| {
                if !is_safe_name(&split.name) {
                    return Err(ConfigError::from(Error::config(
                        format!("dataset.splits[{i}].name"),
                        "must be a non-empty name of letters, digits, '-' or '_'",
                    )));
                }
                if !names.insert(split.name.clone()) {
                    return Err(ConfigError::from(Error::config(
                        format!("dataset.splits[{i}].name"),
                        format!("duplicate split `{}`", split.name),
                    )));
                }
                let spec = DatasetSpec {
                    split: split.name.clone(),
                    count: split.count,
                    master_seed: split.master_seed,
                    grid: self.grid,
                    medium: self.medium.clone(),
                    source: self.source(),
                    sim: self.sim.clone(),
                    rate: self.acquisition.rate,
                    interrogators: self.interrogators.clone(),
                    ranges: section.ranges.clone(),
                    epicenter_margin: section.epicenter_margin,
                };
                spec.validate().map_err(|e| match e {
                    Error::Config { field, reason } if field == "dataset.count" => ConfigError::from(
                        Error::config(format!("dataset.splits[{i}].count"), reason),
                    ),
                    other => ConfigError::from(other),
                })?;
                Ok(spec)
            })
            .collect()
    }
}

fn is_safe_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}
