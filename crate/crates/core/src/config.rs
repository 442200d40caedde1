//! TOML configuration file shared by the command-line tool and examples.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curriculum::{self, CurriculumStage};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::geometry::VehicleSpec;
use crate::hybrid_astar::PlannerConfig;
use crate::policy::PolicyConfig;
use crate::ppo::TrainConfig;

/// Every section is optional; missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub vehicle: VehicleSpec,
    pub env: EnvConfig,
    pub planner: PlannerConfig,
    pub policy: PolicyConfig,
    pub train: TrainConfig,
    pub curriculum: Vec<CurriculumStage>,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            vehicle: VehicleSpec::default(),
            env: EnvConfig::default(),
            planner: PlannerConfig::default(),
            policy: PolicyConfig::default(),
            train: TrainConfig::default(),
            curriculum: curriculum::default_stages(),
        }
    }
}

impl AppConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: AppConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.vehicle.validate()?;
        self.env.validate()?;
        self.planner.validate()?;
        self.train_config().validate()
    }

    /// Training configuration with the shared sections filled in.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            stages: self.curriculum.clone(),
            env: self.env,
            policy: self.policy,
            spec: self.vehicle,
            ..self.train.clone()
        }
    }
}
