//! Agent configuration file (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pits_core::{DeviceId, TreeParams};

use crate::node::NodeConfig;
use crate::AgentError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub device: DeviceId,
    /// Base URL of the notary, e.g. `http://127.0.0.1:7400`.
    pub notary: String,
    pub data_dir: PathBuf,
    #[serde(default = "default_skew")]
    pub skew_seconds: u64,
    #[serde(default)]
    pub params: TreeParams,
}

fn default_skew() -> u64 {
    2
}

impl AgentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, AgentError> {
        let text = std::fs::read_to_string(path.as_ref())?;
        toml::from_str(&text).map_err(|e| AgentError::Corrupt(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn node_config(&self) -> NodeConfig {
        NodeConfig {
            device: self.device.clone(),
            params: self.params,
            skew_ticks: self.skew_seconds * self.params.ticks_per_second,
        }
    }

    pub fn inbox_dir(&self) -> PathBuf {
        self.data_dir.join("inbox")
    }

    pub fn receipts_path(&self) -> PathBuf {
        self.data_dir.join("receipts.jsonl")
    }
}
