//! Run configuration files.
//!
//! ```toml
//! seed = 7
//! vehicle = "bluerov2_heavy.toml"   # relative to this file
//! out_dir = "runs/circle"
//!
//! [task]
//! kind = "circle"
//! error_frame = "body"
//!
//! [batch]
//! envs = 1024
//! threads = 0                        # 0: one per core
//!
//! [train]
//! total_env_steps = 5_000_000
//! ```
//!
//! Every section is optional and falls back to the library defaults; `seed`
//! is required.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::batch::RandomizationRanges;
use crate::dynamics::{ParamsError, VehicleParams};
use crate::rl::{PdGains, TrainConfig, TrainEnv};
use crate::tasks::TaskSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchSection {
    pub envs: usize,
    /// Worker threads; 0 means one per available core.
    pub threads: usize,
    pub randomization: Option<RandomizationRanges>,
}

impl Default for BatchSection {
    fn default() -> Self {
        Self { envs: 1024, threads: 0, randomization: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub episodes: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { episodes: 100 }
    }
}

/// Contents of a run config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Vehicle parameter file. Relative paths are resolved against the
    /// directory of the config file. Built-in defaults when absent.
    #[serde(default)]
    pub vehicle: Option<PathBuf>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub task: TaskSpec,
    #[serde(default)]
    pub batch: BatchSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub pd: PdGains,
    #[serde(default)]
    pub eval: EvalSection,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: Box<toml::de::Error> },
    #[error("vehicle file {path}: {source}")]
    Vehicle { path: PathBuf, source: ParamsError },
    #[error("{0}")]
    Invalid(String),
}

/// A parsed config with its vehicle parameters loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub run: RunConfig,
    pub vehicle: VehicleParams,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut run: RunConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), source: Box::new(e) })?;
        run.train.seed = run.seed;
        Ok(run)
    }

    /// Reads and validates `path`, loading the referenced vehicle file.
    pub fn load(path: &Path) -> Result<Loaded, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let mut run = Self::from_toml_str(&text, path)?;
        let vehicle = match &run.vehicle {
            None => VehicleParams::bluerov2_heavy(),
            Some(rel) => {
                let resolved = path.parent().unwrap_or(Path::new(".")).join(rel);
                let params = VehicleParams::load(&resolved)
                    .map_err(|source| ConfigError::Vehicle { path: resolved.clone(), source })?;
                run.vehicle = Some(resolved);
                params
            }
        };
        let loaded = Loaded { run, vehicle };
        loaded.validate()?;
        Ok(loaded)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
    }
}

impl Loaded {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        let run = &self.run;
        run.task.validate().map_err(|e| invalid(&e))?;
        run.train.validate().map_err(|e| invalid(&e))?;
        if let Some(r) = &run.batch.randomization {
            r.validate().map_err(|e| invalid(&e))?;
        }
        self.vehicle.clone().validate().map_err(|e| invalid(&e))?;
        if run.batch.envs == 0 {
            return Err(ConfigError::Invalid("batch.envs must be at least 1".into()));
        }
        if run.eval.episodes == 0 {
            return Err(ConfigError::Invalid("eval.episodes must be at least 1".into()));
        }
        if !run.pd.is_finite() {
            return Err(ConfigError::Invalid("pd gains must be finite".into()));
        }
        Ok(())
    }

    pub fn train_env(&self) -> TrainEnv {
        TrainEnv {
            spec: self.run.task.clone(),
            vehicle: self.vehicle.clone(),
            ranges: self.run.batch.randomization.clone(),
            envs: self.run.batch.envs,
            threads: self.run.batch.threads,
        }
    }
}
