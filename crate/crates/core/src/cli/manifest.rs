//! Run manifests: everything needed to reproduce a command's outputs.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::eval::sweep::TrajectorySpec;
use crate::io::config::{config_document, parse_scenario_config};
use crate::io::detect::ProfileClass;
use crate::io::pcd::PcdEncoding;
use crate::model::{ScenarioConfig, Tier};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Pcd,
    Lfrm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDescriptor {
    /// Absolute path at the time of the run.
    pub path: String,
    pub format: InputFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoding: Option<PcdEncoding>,
    pub frames: usize,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub scene_seed: u64,
    pub repeats: usize,
    pub tiers: Vec<Tier>,
    pub trajectory: TrajectorySpec,
    pub profile: ProfileClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub global_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier: Option<Tier>,
    /// Fully expanded scenario config in the config-file layout.
    pub config: serde_json::Value,
    #[serde(default)]
    pub inputs: Vec<InputDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSettings>,
    /// Seconds since the Unix epoch.
    pub start_time: f64,
}

impl RunManifest {
    pub fn new(command: &str, cfg: &ScenarioConfig) -> Self {
        let start_time = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            global_seed: cfg.global_seed,
            tier: None,
            config: config_document(cfg),
            inputs: Vec::new(),
            sweep: None,
            start_time,
        }
    }

    pub fn scenario(&self) -> Result<ScenarioConfig, CliError> {
        let text = serde_json::to_string(&self.config).expect("JSON values serialize");
        Ok(parse_scenario_config(&text)?)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Manifest(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }
}
