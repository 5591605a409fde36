//! Hub configuration file (TOML). Every section and field is optional.
//!
//! ```toml
//! [detection]
//! max_cycle_s = 20.0
//! hold_window_s = 1.0
//!
//! [detection.lift]
//! grip_threshold_n = 5.0
//!
//! [progression]
//! initial_goal = 1
//! step = 1
//! comparator = "at_least"      # or "exceeds"
//!
//! [hub]
//! reorder_horizon_ms = 200
//! ring_capacity = 4096
//! min_baseline_load = 50.0
//! tick_ms = 10
//!
//! [hub.registry]
//! stale_timeout_ms = 5000
//! departure_timeout_ms = 60000
//!
//! [day_parts]
//! afternoon_from_hour = 12
//! evening_from_hour = 18
//!
//! [faults]
//! loss_prob = 0.0
//!
//! [server]
//! bind = "127.0.0.1"
//! port = 8080
//! udp_port = 9750
//! store = "homesense-store"
//! ```

use crate::detect::DetectionConfig;
use crate::metrics::DayParts;
use crate::progression::ProgressionConfig;
use crate::sim::FaultProfile;
use crate::wire::RegistryConfig;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HubSettings {
    pub reorder_horizon_ms: u64,
    pub ring_capacity: usize,
    /// Smallest mean seat load accepted as a seated calibration, pressure units.
    pub min_baseline_load: f64,
    /// Period of the session clock tick driving releases and timeouts.
    pub tick_ms: u64,
    pub registry: RegistryConfig,
}

impl Default for HubSettings {
    fn default() -> Self {
        Self {
            reorder_horizon_ms: super::reorder::DEFAULT_HORIZON_MS,
            ring_capacity: 4096,
            min_baseline_load: 50.0,
            tick_ms: 10,
            registry: RegistryConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub bind: String,
    pub port: u16,
    pub udp_port: u16,
    pub store: PathBuf,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { bind: "127.0.0.1".into(), port: 8080, udp_port: 9750, store: PathBuf::from("homesense-store") }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HubConfig {
    pub detection: DetectionConfig,
    pub progression: ProgressionConfig,
    pub hub: HubSettings,
    pub day_parts: DayParts,
    pub faults: FaultProfile,
    pub server: ServerConfig,
}

impl HubConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigFileError> {
        let cfg: HubConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigFileError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigFileError> {
        let invalid = |m: String| Err(ConfigFileError::Invalid(m));
        if let Err(e) = self.detection.validate() {
            return invalid(e.to_string());
        }
        if let Err(e) = self.progression.validate() {
            return invalid(e);
        }
        if let Err(e) = self.faults.validate() {
            return invalid(e.to_string());
        }
        if self.hub.ring_capacity == 0 || self.hub.tick_ms == 0 {
            return invalid("ring_capacity and tick_ms must be positive".into());
        }
        if self.hub.registry.departure_timeout_ms <= self.hub.registry.stale_timeout_ms {
            return invalid("departure_timeout_ms must exceed stale_timeout_ms".into());
        }
        let p = self.day_parts;
        if !(p.afternoon_from_hour < p.evening_from_hour && p.evening_from_hour <= 24) {
            return invalid("day parts must satisfy afternoon < evening <= 24".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_defaults() {
        assert_eq!(HubConfig::from_toml("").unwrap(), HubConfig::default());
    }

    #[test]
    fn overrides() {
        let c = HubConfig::from_toml(
            "[detection]\nmax_cycle_s = 15\n[progression]\ncomparator = \"exceeds\"\n[hub]\nreorder_horizon_ms = 150\n",
        )
        .unwrap();
        assert_eq!(c.detection.max_cycle_s, 15.0);
        assert_eq!(c.progression.comparator, crate::progression::Comparator::Exceeds);
        assert_eq!(c.hub.reorder_horizon_ms, 150);
        assert_eq!(c.hub.ring_capacity, 4096);
    }

    #[test]
    fn rejects_invalid() {
        assert!(HubConfig::from_toml("[detection]\nhold_window_s = 3.0\n").is_err());
        assert!(HubConfig::from_toml("[detection]\nunknown_field = [").is_err());
    }
}
