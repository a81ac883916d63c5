//! Engine configuration: one documented TOML file drives every stage.
//!
//! Every detection threshold is overridable and defaults to the engine's
//! standard value, so a config file only needs the keys it changes:
//!
//! ```toml
//! prices = "prices.csv"
//! workers = 4
//!
//! [source]
//! kind = "fixture"
//! path = "chain.ndjson"
//!
//! [displacement]
//! match_threshold = 0.95     # copied-input containment
//! input_ratio = 0.25         # victim/attacker payload chunk ratio
//! window_blocks = 100
//! window_stride = 20
//!
//! [insertion]
//! amount_similarity = 0.01   # |bought − resold| / max
//!
//! [insertion.gas_tokens]
//! custom = ["0x000000000000000000000000000000000000beef"]
//!
//! [suppression]
//! gas_ratio = 0.99           # per-transaction gas_used/gas_limit
//! base_tx_gas = 21000
//! loop_repeats = 10
//! ```
//!
//! Unknown keys are rejected rather than silently ignored, so typos in
//! threshold names cannot weaken a scan.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chain_model::PriceTable;
use crate::displacement::DisplacementConfig;
use crate::ingestion::{DataSource, FixtureSource, JsonRpcSource};
use crate::insertion::InsertionConfig;
use crate::suppression::SuppressionConfig;
use crate::{Error, Result};

/// Where chain data comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    /// Newline-delimited JSON fixture on disk.
    Fixture { path: PathBuf },
    /// JSON-RPC endpoint of an archive node.
    Rpc {
        url: String,
        #[serde(default = "default_batch_size")]
        batch_size: usize,
        #[serde(default = "default_retry_count")]
        retry_count: u32,
    },
}

fn default_batch_size() -> usize {
    100
}

fn default_retry_count() -> u32 {
    3
}

/// Top-level engine configuration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Chain data source; commands that read a chain require it (or an
    /// explicit path on the command line).
    pub source: Option<SourceConfig>,
    /// CSV table of daily ether prices.
    pub prices: Option<PathBuf>,
    /// Worker threads for block-parallel stages; 0 means one per core.
    pub workers: usize,
    pub displacement: DisplacementConfig,
    pub insertion: InsertionConfig,
    pub suppression: SuppressionConfig,
}

impl EngineConfig {
    pub fn from_toml_str(text: &str) -> Result<EngineConfig> {
        toml::from_str(text).map_err(|e| Error::Data(format!("config parse failed: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<EngineConfig> {
        let text = std::fs::read_to_string(path)?;
        EngineConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Internal(format!("config serialization failed: {e}")))
    }

    /// Opens the configured chain source.
    pub fn open_source(&self) -> Result<Box<dyn DataSource>> {
        match &self.source {
            Some(SourceConfig::Fixture { path }) => Ok(Box::new(FixtureSource::from_path(path)?)),
            Some(SourceConfig::Rpc {
                url,
                batch_size,
                retry_count,
            }) => Ok(Box::new(JsonRpcSource::new(
                url,
                *batch_size,
                *retry_count,
            )?)),
            None => Err(Error::InvalidParameter(
                "no chain source configured; set [source] or pass --chain".into(),
            )),
        }
    }

    /// Loads the configured price table.
    pub fn load_prices(&self) -> Result<PriceTable> {
        match &self.prices {
            Some(path) => PriceTable::from_csv_path(path),
            None => Err(Error::InvalidParameter(
                "no price table configured; set `prices` or pass --prices".into(),
            )),
        }
    }
}
