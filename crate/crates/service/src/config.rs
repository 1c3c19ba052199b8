//! Service configuration, read from a TOML file:
//!
//! ```toml
//! listen_address = "127.0.0.1:8080"
//! data_dir = "/var/lib/acorp"
//! compute_price = 1
//! clock_mode = "wall"        # or "fixed:1000"
//! # optional
//! repurchase_batch = 100
//! id_seed = 0
//! mandate = true
//! fsync = true
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use acorp_core::ledger::LedgerConfig;
use acorp_core::AuthorityConfig;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ServiceError;

/// Where the service takes timestamps for operations the client does not
/// timestamp itself (ownership transfers, sanctions, default verify time).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockMode {
    /// Seconds since the Unix epoch.
    Wall,
    Fixed(u64),
}

impl ClockMode {
    pub fn read(self) -> u64 {
        match self {
            ClockMode::Wall => SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            ClockMode::Fixed(t) => t,
        }
    }
}

impl fmt::Display for ClockMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClockMode::Wall => f.write_str("wall"),
            ClockMode::Fixed(t) => write!(f, "fixed:{t}"),
        }
    }
}

impl FromStr for ClockMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wall" => Ok(ClockMode::Wall),
            other => other
                .strip_prefix("fixed:")
                .and_then(|t| t.parse().ok())
                .map(ClockMode::Fixed)
                .ok_or_else(|| format!("clock mode must be `wall` or `fixed:<timestamp>`, got {s:?}")),
        }
    }
}

impl Serialize for ClockMode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClockMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn default_batch() -> u64 {
    LedgerConfig::default().repurchase_batch
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen_address: String,
    pub data_dir: PathBuf,
    pub compute_price: u64,
    pub clock_mode: ClockMode,
    #[serde(default = "default_batch")]
    pub repurchase_batch: u64,
    #[serde(default)]
    pub id_seed: u64,
    /// Require a verifiable credential on every submitted action.
    #[serde(default = "yes")]
    pub mandate: bool,
    #[serde(default = "yes")]
    pub fsync: bool,
}

impl ServiceConfig {
    pub fn new(listen_address: impl Into<String>, data_dir: impl Into<PathBuf>) -> Self {
        Self {
            listen_address: listen_address.into(),
            data_dir: data_dir.into(),
            compute_price: LedgerConfig::default().compute_price,
            clock_mode: ClockMode::Wall,
            repurchase_batch: default_batch(),
            id_seed: 0,
            mandate: true,
            fsync: true,
        }
    }

    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ServiceError> {
        toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn authority_config(&self) -> AuthorityConfig {
        AuthorityConfig {
            ledger: LedgerConfig {
                compute_price: self.compute_price,
                repurchase_batch: self.repurchase_batch,
            },
            id_seed: self.id_seed,
        }
    }

    /// Checks the config and that `data_dir` can be created and written.
    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.compute_price == 0 {
            return Err(ServiceError::Config("compute_price must be at least 1".into()));
        }
        if self.repurchase_batch == 0 {
            return Err(ServiceError::Config("repurchase_batch must be at least 1".into()));
        }
        std::fs::create_dir_all(&self.data_dir)
            .and_then(|_| tempfile_probe(&self.data_dir))
            .map_err(|e| ServiceError::Config(format!("data_dir {} is not writable: {e}", self.data_dir.display())))
    }
}

fn tempfile_probe(dir: &Path) -> std::io::Result<()> {
    let probe = dir.join(".write-probe");
    std::fs::write(&probe, b"")?;
    std::fs::remove_file(probe)
}
