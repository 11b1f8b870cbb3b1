//! Node configuration: a TOML file, then `TRUSTCHAIN_DATA_DIR`, then CLI flags.
//!
//! ```toml
//! data-dir = "/var/lib/trustchain"
//! chain-id = "trustchain-local"
//! bits = 16
//! listen = "127.0.0.1:8421"
//! root = "2023-11-14:nthnka"
//! keystore = "/var/lib/trustchain/keystore.json"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trustchain_core::registry::DEFAULT_BITS;
use trustchain_core::roottrust::RootParameters;
use trustchain_core::ChainParams;

use crate::error::WireError;

pub const DATA_DIR_ENV: &str = "TRUSTCHAIN_DATA_DIR";
pub const CONFIG_FILE: &str = "node.toml";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct NodeConfig {
    pub data_dir: PathBuf,
    pub chain_id: String,
    pub bits: u32,
    pub listen: String,
    /// Root parameters in `date[:code]` form.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root: Option<String>,
    /// Defaults to `keystore.json` in the data directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keystore: Option<PathBuf>,
}

impl Default for NodeConfig {
    fn default() -> Self {
        NodeConfig {
            data_dir: PathBuf::from("trustchain-data"),
            chain_id: "trustchain-local".into(),
            bits: DEFAULT_BITS,
            listen: "127.0.0.1:8421".into(),
            root: None,
            keystore: None,
        }
    }
}

/// Values given on the command line; each one set wins over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub chain_id: Option<String>,
    pub bits: Option<u32>,
    pub listen: Option<String>,
    pub root: Option<String>,
    pub keystore: Option<PathBuf>,
}

impl NodeConfig {
    pub fn parse(text: &str) -> Result<Self, WireError> {
        toml::from_str(text).map_err(|e| WireError::new("config", e))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }

    /// Reads the file named by `--config`, or `node.toml` in the data
    /// directory if present, then applies the environment and the flags.
    pub fn load(overrides: &Overrides, env_data_dir: Option<PathBuf>) -> Result<Self, WireError> {
        let data_dir = overrides.data_dir.clone().or(env_data_dir.clone());
        let path = match &overrides.config {
            Some(p) => Some(p.clone()),
            None => {
                let dir = data_dir.clone().unwrap_or_else(|| NodeConfig::default().data_dir);
                Some(dir.join(CONFIG_FILE)).filter(|p| p.exists())
            }
        };
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(&p).map_err(|e| WireError::new("config", format!("{}: {e}", p.display())))?;
                NodeConfig::parse(&text)?
            }
            None => NodeConfig::default(),
        };
        if let Some(dir) = data_dir {
            config.data_dir = dir;
        }
        if let Some(v) = &overrides.chain_id {
            config.chain_id = v.clone();
        }
        if let Some(v) = overrides.bits {
            config.bits = v;
        }
        if let Some(v) = &overrides.listen {
            config.listen = v.clone();
        }
        if let Some(v) = &overrides.root {
            config.root = Some(v.clone());
        }
        if let Some(v) = &overrides.keystore {
            config.keystore = Some(v.clone());
        }
        Ok(config)
    }

    pub fn chain_params(&self) -> ChainParams {
        ChainParams::new(&self.chain_id).with_bits(self.bits)
    }

    pub fn registry_dir(&self) -> PathBuf {
        self.data_dir.join("registry")
    }

    pub fn keystore_path(&self) -> PathBuf {
        self.keystore.clone().unwrap_or_else(|| self.data_dir.join("keystore.json"))
    }

    pub fn headers_path(&self) -> PathBuf {
        self.data_dir.join("headers.bin")
    }

    pub fn config_path(dir: &Path) -> PathBuf {
        dir.join(CONFIG_FILE)
    }

    pub fn root_params(&self) -> Result<Option<RootParameters>, WireError> {
        self.root.as_deref().map(|r| r.parse().map_err(|e| WireError::new("usage", format!("root parameters {r:?}: {e}")))).transpose()
    }
}
