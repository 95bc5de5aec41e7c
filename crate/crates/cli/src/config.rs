//! The JSON run configuration for `simulate`.
//!
//! ```json
//! {
//!   "species": { "mass": 1.0, "alpha": 0.0, "units": "reduced" },
//!   "kernel":  { "zeta": 1.0, "K": 1.0, "eta": 0.5, "eta_f": 0.5, "omega": 1.0, "angular": "uniform" },
//!   "initial": { "particles": 100000, "seed": 1,
//!                "distribution": { "type": "bimodal", "density": 1.0, "speed": 1.5,
//!                                  "beam_temperature": 0.25, "internal_temperature": 1.0 } },
//!   "solver":  { "dt": 0.005, "t_end": 5.0, "seed": 3 },
//!   "output":  { "dir": "out" }
//! }
//! ```
//!
//! Validation messages name the offending field as a dotted path.

use std::path::{Path, PathBuf};

use polykin::transport::alpha_from_cv;
use polykin::{InitialCondition, KernelParams, KernelSettings, SolverConfig, Species, UnitSystem};
use serde::{Deserialize, Serialize};

use crate::error::{io_error, CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub species: SpeciesConfig,
    #[serde(default)]
    pub kernel: KernelSettings,
    pub initial: InitialConfig,
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Give exactly one of `alpha` and `c_v_hat`. Units default to reduced (`k_B = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesConfig {
    #[serde(alias = "m", default = "one")]
    pub mass: f64,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub c_v_hat: Option<f64>,
    #[serde(default = "reduced")]
    pub units: UnitSystem,
}

fn one() -> f64 {
    1.0
}
fn reduced() -> UnitSystem {
    UnitSystem::Reduced
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub particles: usize,
    #[serde(default)]
    pub seed: u64,
    pub distribution: InitialCondition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_timeseries")]
    pub timeseries: String,
    #[serde(default = "default_summary")]
    pub summary: String,
    /// Also write `envelope.csv` with the `t^{-(k-2)/ζ}` overlay for each tracked moment.
    #[serde(default)]
    pub envelope: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("output")
}
fn default_timeseries() -> String {
    "timeseries.csv".into()
}
fn default_summary() -> String {
    "summary.json".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            timeseries: default_timeseries(),
            summary: default_summary(),
            envelope: false,
        }
    }
}

/// Everything `simulate` needs, checked.
#[derive(Debug, Clone)]
pub struct ValidatedRun {
    pub species: Species,
    pub kernel: KernelParams,
    pub config: RunConfig,
}

fn prefixed(block: &str, e: polykin::Error) -> CliError {
    match e {
        polykin::Error::Domain(m) => CliError::config(format!("{block}.{m}")),
        other => CliError::config(format!("{block}: {other}")),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path.is_empty() || path == "." {
                CliError::config(format!("config: {inner}"))
            } else {
                CliError::config(format!("config field `{path}`: {inner}"))
            }
        })
    }

    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(self) -> CliResult<ValidatedRun> {
        let sp = &self.species;
        let alpha = match (sp.alpha, sp.c_v_hat) {
            (Some(a), None) => a,
            (None, Some(cv)) => alpha_from_cv(cv).map_err(|e| prefixed("species", e))?.alpha,
            (Some(_), Some(_)) => return Err(CliError::config("species.alpha: give either alpha or c_v_hat, not both")),
            (None, None) => return Err(CliError::config("species.alpha: one of alpha or c_v_hat is required")),
        };
        let species = Species::new(sp.mass, alpha, sp.units).map_err(|e| prefixed("species", e))?;
        let kernel = KernelParams::new(alpha, self.kernel).map_err(|e| match e {
            polykin::Error::Domain(m) if m.starts_with("alpha") => CliError::config(format!("species.{m}")),
            other => prefixed("kernel", other),
        })?;
        if self.initial.particles < 2 {
            return Err(CliError::config(format!(
                "initial.particles must be at least 2, got {}",
                self.initial.particles
            )));
        }
        self.initial.distribution.validate().map_err(|e| prefixed("initial.distribution", e))?;
        self.solver.validate().map_err(|e| prefixed("solver", e))?;
        if self.output.timeseries.is_empty() {
            return Err(CliError::config("output.timeseries must not be empty"));
        }
        if self.output.summary.is_empty() {
            return Err(CliError::config("output.summary must not be empty"));
        }
        Ok(ValidatedRun {
            species,
            kernel,
            config: self,
        })
    }
}

impl ValidatedRun {
    pub fn create_output_dir(&self) -> CliResult<PathBuf> {
        let dir = self.config.output.dir.clone();
        std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        Ok(dir)
    }
}
