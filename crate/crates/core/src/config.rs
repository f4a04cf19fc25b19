//! Run configuration: TOML ingestion, defaulting and validation.
//!
//! Every section and key is optional. Missing values fall back to the
//! shipped case-study configuration (`config/default.toml`), unknown keys are
//! rejected, and validation errors name the offending key path.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::laminate::{LoadState, PlateModel};
use crate::materials::ConstituentSet;
use crate::optimizer::GaParams;
use crate::stochastic::{InputSet, ScaleTag, StochasticInputSpec, N_INPUTS};

/// The shipped case-study configuration.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../config/default.toml");

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub constituents: ConstituentSet,
    pub layup: LayupConfig,
    pub load: LoadConfig,
    pub uq: UqConfig,
    pub pce: PceConfig,
    pub ga: GaConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayupConfig {
    pub angles_deg: [f64; 4],
    pub thickness_mm: [f64; 4],
    pub symmetric: bool,
    pub plate_ax_mm: f64,
    pub plate_ay_mm: f64,
}

impl Default for LayupConfig {
    fn default() -> Self {
        LayupConfig {
            angles_deg: [0.0, 90.0, 45.0, -45.0],
            thickness_mm: [1.25; 4],
            symmetric: true,
            plate_ax_mm: 2000.0,
            plate_ay_mm: 2000.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadConfig {
    pub nx_n_per_mm: f64,
    pub ny_n_per_mm: f64,
    pub nxy_n_per_mm: f64,
    pub mx_n: f64,
    pub my_n: f64,
    pub mxy_n: f64,
}

impl Default for LoadConfig {
    fn default() -> Self {
        LoadConfig {
            nx_n_per_mm: 100.0,
            ny_n_per_mm: 0.0,
            nxy_n_per_mm: 0.0,
            mx_n: 0.0,
            my_n: 0.0,
            mxy_n: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub name: String,
    pub scale: ScaleTag,
    pub mean: f64,
    pub rel_std: f64,
    pub lower: f64,
    pub upper: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hard_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hard_max: Option<f64>,
}

/// Physical clamps used when an input omits `hard_min`/`hard_max`, by position.
const DEFAULT_HARD_BOUNDS: [(f64, f64); N_INPUTS] = [
    (0.01, 0.99),
    (0.01, 100.0),
    (0.01, 100.0),
    (0.01, 100.0),
    (0.01, 100.0),
    (0.0, 1.0e6),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UqConfig {
    pub samples_inner: usize,
    pub samples_report: usize,
    pub seed: u64,
    pub inputs: Vec<InputConfig>,
}

impl Default for UqConfig {
    fn default() -> Self {
        let inputs = InputSet::case_study()
            .specs()
            .iter()
            .map(|s| InputConfig {
                name: s.name.clone(),
                scale: s.scale,
                mean: s.mean,
                rel_std: s.rel_std,
                lower: s.lower,
                upper: s.upper,
                hard_min: Some(s.hard_min),
                hard_max: Some(s.hard_max),
            })
            .collect();
        UqConfig {
            samples_inner: 256,
            samples_report: 10_000,
            seed: 42,
            inputs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PceConfig {
    pub degree: u32,
    pub oversampling: f64,
    pub seed: u64,
}

impl Default for PceConfig {
    fn default() -> Self {
        PceConfig {
            degree: 3,
            oversampling: 2.0,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub crossover_eta: f64,
    pub mutation_eta: f64,
    pub seed: u64,
    /// Largest relative standard deviation a reported optimum may have.
    pub rsd_limit: f64,
}

impl Default for GaConfig {
    fn default() -> Self {
        let p = GaParams::default();
        GaConfig {
            population: p.pop_size,
            generations: p.generations,
            crossover_prob: p.crossover_prob,
            mutation_prob: p.mutation_prob,
            crossover_eta: p.crossover_eta,
            mutation_eta: p.mutation_eta,
            seed: p.seed,
            rsd_limit: 0.10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
    pub overwrite: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: "runs/case-study".into(),
            overwrite: false,
        }
    }
}

fn check_finite(key: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, "must be finite"))
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Parse {
                line,
                message: e.message().to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML serialization.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }

    /// Sets every seed in the configuration.
    pub fn set_seed(&mut self, seed: u64) {
        self.uq.seed = seed;
        self.pce.seed = seed;
        self.ga.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        for (key, seed) in [("uq.seed", self.uq.seed), ("pce.seed", self.pce.seed), ("ga.seed", self.ga.seed)] {
            if seed > i64::MAX as u64 {
                return Err(Error::config(key, "must fit in a signed 64-bit integer"));
            }
        }
        self.constituents.validate().map_err(|e| match e {
            Error::Config { key, reason } => Error::config(format!("constituents.{key}"), reason),
            other => other,
        })?;

        let layup = &self.layup;
        for (i, (&a, &t)) in layup.angles_deg.iter().zip(&layup.thickness_mm).enumerate() {
            check_finite(&format!("layup.angles_deg[{i}]"), a)?;
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::config(format!("layup.thickness_mm[{i}]"), "must be positive"));
            }
        }
        if !layup.symmetric {
            return Err(Error::config("layup.symmetric", "only symmetric layups are supported"));
        }
        for (key, v) in [("layup.plate_ax_mm", layup.plate_ax_mm), ("layup.plate_ay_mm", layup.plate_ay_mm)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, "must be positive"));
            }
        }

        let load = &self.load;
        for (key, v) in [
            ("load.nx_n_per_mm", load.nx_n_per_mm),
            ("load.ny_n_per_mm", load.ny_n_per_mm),
            ("load.nxy_n_per_mm", load.nxy_n_per_mm),
        ] {
            check_finite(key, v)?;
        }
        for (key, v) in [("load.mx_n", load.mx_n), ("load.my_n", load.my_n), ("load.mxy_n", load.mxy_n)] {
            if v != 0.0 {
                return Err(Error::config(key, "only membrane loading is supported; moments must be 0"));
            }
        }

        if self.uq.samples_inner < 2 {
            return Err(Error::config("uq.samples_inner", "must be at least 2"));
        }
        if self.uq.samples_report < 2 {
            return Err(Error::config("uq.samples_report", "must be at least 2"));
        }
        let inputs = self.input_set()?;
        for i in 0..4 {
            if inputs.specs()[i + 1].mean != layup.thickness_mm[i] {
                return Err(Error::config(
                    format!("layup.thickness_mm[{i}]"),
                    format!("must equal uq.inputs[{}].mean", i + 1),
                ));
            }
        }
        if inputs.specs()[5].mean != load.nx_n_per_mm {
            return Err(Error::config("load.nx_n_per_mm", "must equal uq.inputs[5].mean"));
        }

        if self.pce.degree == 0 {
            return Err(Error::config("pce.degree", "must be at least 1"));
        }
        if !(self.pce.oversampling.is_finite() && self.pce.oversampling >= 2.0) {
            return Err(Error::config("pce.oversampling", "must be finite and at least 2"));
        }

        self.ga_params().validate()?;
        if self.ga.rsd_limit.is_nan() || self.ga.rsd_limit < 0.0 {
            return Err(Error::config("ga.rsd_limit", "must be non-negative"));
        }
        if self.output.directory.is_empty() {
            return Err(Error::config("output.directory", "must not be empty"));
        }
        Ok(())
    }

    pub fn input_set(&self) -> Result<InputSet> {
        let specs = self
            .uq
            .inputs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let (hard_min, hard_max) = DEFAULT_HARD_BOUNDS.get(i).copied().unwrap_or((f64::MIN, f64::MAX));
                StochasticInputSpec {
                    name: c.name.clone(),
                    scale: c.scale,
                    mean: c.mean,
                    rel_std: c.rel_std,
                    lower: c.lower,
                    upper: c.upper,
                    hard_min: c.hard_min.unwrap_or(hard_min),
                    hard_max: c.hard_max.unwrap_or(hard_max),
                }
            })
            .collect();
        InputSet::new(specs)
    }

    pub fn plate_model(&self) -> PlateModel {
        PlateModel {
            constituents: self.constituents,
            angles_deg: self.layup.angles_deg,
            base_load: LoadState {
                nx: self.load.nx_n_per_mm,
                ny: self.load.ny_n_per_mm,
                nxy: self.load.nxy_n_per_mm,
                mx: self.load.mx_n,
                my: self.load.my_n,
                mxy: self.load.mxy_n,
            },
        }
    }

    pub fn ga_params(&self) -> GaParams {
        GaParams {
            pop_size: self.ga.population,
            generations: self.ga.generations,
            crossover_prob: self.ga.crossover_prob,
            mutation_prob: self.ga.mutation_prob,
            crossover_eta: self.ga.crossover_eta,
            mutation_eta: self.ga.mutation_eta,
            seed: self.ga.seed,
        }
    }
}

/// Reads `path`, or the built-in case study when `path` is `default`.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    if path.as_os_str() == "default" {
        return RunConfig::from_toml_str(DEFAULT_CONFIG_TOML);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::from_toml_str(&text)
}
