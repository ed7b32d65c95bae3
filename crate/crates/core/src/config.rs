//! One config file for every tunable: plant, placement, exemplar profiles,
//! expert, runtime, policy and training. Missing sections take defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datasets::ExpertConfig;
use crate::error::{Error, Result};
use crate::policies::{PolicyConfig, TrainConfig};
use crate::runtime::RuntimeConfig;
use crate::sim::{ExemplarProfile, PlacementConfig, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub sim: SimConfig,
    pub placement: PlacementConfig,
    pub exemplars: Vec<ExemplarProfile>,
    pub expert: ExpertConfig,
    pub runtime: RuntimeConfig,
    pub policy: PolicyConfig,
    pub train: TrainConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            placement: PlacementConfig::default(),
            exemplars: ExemplarProfile::defaults(),
            expert: ExpertConfig::default(),
            runtime: RuntimeConfig::default(),
            policy: PolicyConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.placement.validate()?;
        if self.exemplars.is_empty() {
            return Err(Error::Config("at least one exemplar profile is required".into()));
        }
        for (i, p) in self.exemplars.iter().enumerate() {
            if self.exemplars[..i].iter().any(|q| q.id == p.id) {
                return Err(Error::Config(format!("duplicate exemplar id {}", p.id)));
            }
            let probe = crate::sim::CarcassSpec {
                exemplar_id: p.id,
                leg_spacing: p.leg_spacing,
                leg_radius: p.leg_radius,
                firm_fraction: p.firm_fraction,
                mass_scale: p.mass_scale,
                init_center: [0.0, 0.0],
                init_yaw: 0.0,
            };
            probe.validate()?;
        }
        self.expert.validate()?;
        self.runtime.validate(&self.sim)?;
        self.policy.validate()?;
        self.train.validate()
    }

    /// Parse TOML, or JSON when the text starts with `{`.
    pub fn from_str_any(text: &str) -> Result<Self> {
        let cfg: Config = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config JSON: {e}")))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(format!("config TOML: {e}")))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_str_any(&text)
    }

    pub fn exemplar_ids(&self) -> Vec<u8> {
        self.exemplars.iter().map(|p| p.id).collect()
    }
}
