//! Run configuration: one TOML file describes a run completely. The schema is
//! versioned and unknown keys are rejected, so a config that parses today
//! parses the same way tomorrow or not at all.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use spicard::{GaussianForceParams, PicardConfig, StokesConfig, SweepPlan};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    // the io/toml causes surface through source(), not Display, so error
    // chains print them exactly once
    #[error("cannot read config {path}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("config schema_version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("scenario `{0}` requires a [{1}] section")]
    Missing(&'static str, &'static str),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    GaussianBenchmark,
    CustomInitial,
    Sweep,
    Verify,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::GaussianBenchmark => "gaussian_benchmark",
            Scenario::CustomInitial => "custom_initial",
            Scenario::Sweep => "sweep",
            Scenario::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub seed: Option<u64>,
    pub output: Option<OutputSection>,
    pub grid: Option<GridSection>,
    pub stokes: Option<StokesSection>,
    #[serde(default)]
    pub picard: PicardSection,
    pub force: Option<ForceSection>,
    pub initial: Option<InitialSection>,
    pub reference: Option<ReferenceSection>,
    pub sweep: Option<SweepSection>,
    pub verify: Option<VerifySection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub box_length: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StokesSection {
    pub viscosity: f64,
    pub t_end: f64,
    pub substeps: usize,
    #[serde(default = "default_true")]
    pub project_force: bool,
    #[serde(default = "default_true")]
    pub with_pressure: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PicardSection {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub divergence_window: usize,
    pub snapshot_times: Vec<f64>,
    pub keep_history: bool,
}

impl Default for PicardSection {
    fn default() -> Self {
        let base = PicardConfig::default();
        PicardSection {
            max_iterations: base.max_iterations,
            tolerance: base.tol_abs,
            divergence_window: base.divergence_ratio_window,
            snapshot_times: base.snapshot_times,
            keep_history: base.keep_history,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceSection {
    pub amplitude: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Zero,
    RandomSolenoidal,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialKind,
    #[serde(default = "default_unit")]
    pub amplitude: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    pub times: Vec<f64>,
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub forces: Vec<f64>,
    pub widths: Vec<f64>,
    pub viscosities: Vec<f64>,
    pub box_coeff: f64,
    pub t_end: f64,
    pub substeps: usize,
    #[serde(default = "default_sweep_n")]
    pub grid_n: usize,
    #[serde(default = "default_sweep_iters")]
    pub max_iterations: usize,
    #[serde(default = "default_sweep_tol")]
    pub tolerance: f64,
    #[serde(default)]
    pub workers: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub run_dir: PathBuf,
}

fn default_true() -> bool {
    true
}

fn default_unit() -> f64 {
    1.0
}

fn default_sweep_n() -> usize {
    32
}

fn default_sweep_iters() -> usize {
    50
}

fn default_sweep_tol() -> f64 {
    1e-10
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        let config: RunConfig = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source: Box::new(source),
        })?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::SchemaVersion {
                found: config.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        Ok(config)
    }

    pub fn grid(&self) -> Result<GridSection, ConfigError> {
        self.grid
            .ok_or(ConfigError::Missing(self.scenario.name(), "grid"))
    }

    pub fn stokes(&self) -> Result<StokesConfig, ConfigError> {
        let section = self
            .stokes
            .as_ref()
            .ok_or(ConfigError::Missing(self.scenario.name(), "stokes"))?;
        Ok(StokesConfig {
            viscosity: section.viscosity,
            t_end: section.t_end,
            substeps: section.substeps,
            project_force: section.project_force,
            with_pressure: section.with_pressure,
        })
    }

    pub fn picard(&self) -> PicardConfig {
        PicardConfig {
            max_iterations: self.picard.max_iterations,
            tol_abs: self.picard.tolerance,
            divergence_ratio_window: self.picard.divergence_window,
            snapshot_times: self.picard.snapshot_times.clone(),
            keep_history: self.picard.keep_history,
        }
    }

    /// The closed-form reference couples the force shape to the fluid
    /// viscosity, so the params need both sections.
    pub fn force_params(&self) -> Result<GaussianForceParams, ConfigError> {
        let section = self
            .force
            .as_ref()
            .ok_or(ConfigError::Missing(self.scenario.name(), "force"))?;
        let viscosity = self
            .stokes
            .as_ref()
            .ok_or(ConfigError::Missing(self.scenario.name(), "stokes"))?
            .viscosity;
        GaussianForceParams::new(section.amplitude, section.width, viscosity)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn sweep_plan(&self) -> Result<SweepPlan, ConfigError> {
        let section = self
            .sweep
            .as_ref()
            .ok_or(ConfigError::Missing(self.scenario.name(), "sweep"))?;
        Ok(SweepPlan {
            force_values: section.forces.clone(),
            width_values: section.widths.clone(),
            viscosity_values: section.viscosities.clone(),
            grid_n: section.grid_n,
            box_coeff: section.box_coeff,
            t_end: section.t_end,
            substeps: section.substeps,
            max_iterations: section.max_iterations,
            tol_abs: section.tolerance,
            workers: section.workers,
        })
    }

    pub fn reference(&self) -> Result<&ReferenceSection, ConfigError> {
        self.reference
            .as_ref()
            .ok_or(ConfigError::Missing(self.scenario.name(), "reference"))
    }

    pub fn verify(&self) -> Result<&VerifySection, ConfigError> {
        self.verify
            .as_ref()
            .ok_or(ConfigError::Missing(self.scenario.name(), "verify"))
    }

    /// Output directory resolution: the --out flag wins over [output].dir.
    pub fn out_dir(&self, cli_override: Option<&Path>) -> Result<PathBuf, ConfigError> {
        if let Some(dir) = cli_override {
            return Ok(dir.to_owned());
        }
        self.output
            .as_ref()
            .map(|section| section.dir.clone())
            .ok_or_else(|| {
                ConfigError::Invalid("no output directory: pass --out or set [output] dir".into())
            })
    }
}
