//! Full node for the Trustchain registry: configuration, key store, HTTP
//! server and client, the scenario runner, and the `trustchain` CLI.

pub mod cli;
pub mod client;
pub mod config;
pub mod error;
pub mod keystore;
pub mod script;
pub mod server;

use std::time::{SystemTime, UNIX_EPOCH};

use trustchain_core::anchor::Ledger;
use trustchain_core::registry::RegistryError;
use trustchain_core::Registry;

use crate::config::NodeConfig;
use crate::error::WireError;

pub fn unix_now() -> u32 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs() as u32).unwrap_or(0)
}

/// Wall-clock time, or just past the tip if the chain is ahead of the clock.
pub fn next_block_time(ledger: &Ledger) -> u32 {
    unix_now().max(ledger.registry().tip().header.timestamp + 1)
}

/// Wall-clock time, never earlier than the tip.
pub fn current_time(ledger: &Ledger) -> u32 {
    unix_now().max(ledger.registry().tip().header.timestamp)
}

/// A node's configuration and its on-disk registry.
#[derive(Debug)]
pub struct Node {
    pub config: NodeConfig,
    pub ledger: Ledger,
}

impl Node {
    /// Creates the data directory, writes `node.toml` if absent, and mines genesis.
    pub fn init(config: NodeConfig) -> Result<Node, WireError> {
        std::fs::create_dir_all(&config.data_dir)?;
        let path = NodeConfig::config_path(&config.data_dir);
        if !path.exists() {
            std::fs::write(&path, config.to_toml())?;
        }
        let registry = Registry::open(config.registry_dir(), config.chain_params()).map_err(corrupt)?;
        Ok(Node { config, ledger: Ledger::new(registry) })
    }

    pub fn open(config: NodeConfig) -> Result<Node, WireError> {
        if !config.registry_dir().join("chain.bin").exists() {
            return Err(WireError::new("not-initialized", format!("no registry under {}; run `trustchain init`", config.data_dir.display())));
        }
        let registry = Registry::open(config.registry_dir(), config.chain_params()).map_err(corrupt)?;
        Ok(Node { config, ledger: Ledger::new(registry) })
    }
}

fn corrupt(e: RegistryError) -> WireError {
    WireError::new("corrupt-data-dir", e)
}
