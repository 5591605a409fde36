//! Hub-side registry of peripherals that have been heard from.
//!
//! Unknown peripherals are enrolled on their first packet. Liveness is
//! derived from hub receipt time only; device clocks are never trusted here.

use super::{PeripheralId, PeripheralPacket};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PeripheralStatus {
    Active,
    Stale,
    Departed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IngestVerdict {
    Fresh,
    Duplicate,
    Reordered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegistryConfig {
    pub stale_timeout_ms: u64,
    pub departure_timeout_ms: u64,
}

impl Default for RegistryConfig {
    fn default() -> Self {
        Self { stale_timeout_ms: 5_000, departure_timeout_ms: 60_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub id: PeripheralId,
    pub last_seq: u32,
    /// Hub time of the last accepted packet, ms.
    pub last_seen_ms: u64,
    pub status: PeripheralStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusTransition {
    pub id: PeripheralId,
    /// `None` when the peripheral has just enrolled.
    pub from: Option<PeripheralStatus>,
    pub to: PeripheralStatus,
    pub at_ms: u64,
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    config: RegistryConfig,
    entries: BTreeMap<PeripheralId, RegistryEntry>,
}

impl Registry {
    pub fn new(config: RegistryConfig) -> Self {
        assert!(config.departure_timeout_ms > config.stale_timeout_ms, "departure timeout must exceed stale timeout");
        Self { config, entries: BTreeMap::new() }
    }

    pub fn config(&self) -> RegistryConfig {
        self.config
    }

    pub fn get(&self, id: &PeripheralId) -> Option<&RegistryEntry> {
        self.entries.get(id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &RegistryEntry> {
        self.entries.values()
    }

    /// Immutable copy for readers.
    pub fn snapshot(&self) -> Vec<RegistryEntry> {
        self.entries.values().cloned().collect()
    }

    /// Classifies a decoded packet and updates liveness.
    ///
    /// Returns the verdict and, when the packet changes the peripheral's
    /// status (first enrollment or a Stale/Departed peripheral coming back),
    /// the corresponding transition.
    pub fn ingest(&mut self, packet: &PeripheralPacket, hub_now_ms: u64) -> (IngestVerdict, Option<StatusTransition>) {
        let Some(entry) = self.entries.get_mut(&packet.id) else {
            self.entries.insert(
                packet.id,
                RegistryEntry {
                    id: packet.id,
                    last_seq: packet.seq,
                    last_seen_ms: hub_now_ms,
                    status: PeripheralStatus::Active,
                },
            );
            let t = StatusTransition { id: packet.id, from: None, to: PeripheralStatus::Active, at_ms: hub_now_ms };
            return (IngestVerdict::Fresh, Some(t));
        };

        let verdict = if packet.seq > entry.last_seq {
            IngestVerdict::Fresh
        } else if packet.seq == entry.last_seq {
            IngestVerdict::Duplicate
        } else {
            IngestVerdict::Reordered
        };
        if verdict == IngestVerdict::Duplicate {
            return (verdict, None);
        }
        if verdict == IngestVerdict::Fresh {
            entry.last_seq = packet.seq;
        }
        entry.last_seen_ms = entry.last_seen_ms.max(hub_now_ms);
        let transition = (entry.status != PeripheralStatus::Active).then(|| {
            let t = StatusTransition {
                id: packet.id,
                from: Some(entry.status),
                to: PeripheralStatus::Active,
                at_ms: hub_now_ms,
            };
            entry.status = PeripheralStatus::Active;
            t
        });
        (verdict, transition)
    }

    /// Ages every entry against `hub_now_ms` and reports status changes.
    pub fn sweep(&mut self, hub_now_ms: u64) -> Vec<StatusTransition> {
        let cfg = self.config;
        let mut out = Vec::new();
        for entry in self.entries.values_mut() {
            let quiet = hub_now_ms.saturating_sub(entry.last_seen_ms);
            let status = if quiet > cfg.departure_timeout_ms {
                PeripheralStatus::Departed
            } else if quiet > cfg.stale_timeout_ms {
                PeripheralStatus::Stale
            } else {
                PeripheralStatus::Active
            };
            if status != entry.status {
                out.push(StatusTransition { id: entry.id, from: Some(entry.status), to: status, at_ms: hub_now_ms });
                entry.status = status;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::{Payload, PeripheralKind};

    fn packet(seq: u32) -> PeripheralPacket {
        PeripheralPacket {
            id: PeripheralId::new(PeripheralKind::SeatCushion, 0),
            seq,
            device_time_ms: seq as u64 * 50,
            payload: Payload::Heartbeat,
        }
    }

    #[test]
    fn new_peripheral_enrolls_fresh() {
        let mut r = Registry::new(RegistryConfig::default());
        let (v, t) = r.ingest(&packet(0), 10);
        assert_eq!(v, IngestVerdict::Fresh);
        assert_eq!(t.unwrap().to, PeripheralStatus::Active);
        assert_eq!(r.get(&packet(0).id).unwrap().status, PeripheralStatus::Active);
    }

    #[test]
    fn duplicate_leaves_state_untouched() {
        let mut r = Registry::new(RegistryConfig::default());
        r.ingest(&packet(4), 10);
        let before = r.snapshot();
        let (v, _) = r.ingest(&packet(4), 20);
        assert_eq!(v, IngestVerdict::Duplicate);
        assert_eq!(r.snapshot(), before);
    }

    #[test]
    fn reordered_keeps_last_seq() {
        let mut r = Registry::new(RegistryConfig::default());
        r.ingest(&packet(5), 10);
        let (v, _) = r.ingest(&packet(3), 20);
        assert_eq!(v, IngestVerdict::Reordered);
        assert_eq!(r.get(&packet(0).id).unwrap().last_seq, 5);
    }

    #[test]
    fn sweep_boundaries() {
        let cfg = RegistryConfig::default();
        let mut r = Registry::new(cfg);
        r.ingest(&packet(0), 1_000);
        assert!(r.sweep(1_000).is_empty());
        assert!(r.sweep(1_000 + cfg.stale_timeout_ms).is_empty());
        let t = r.sweep(1_000 + cfg.stale_timeout_ms + 1);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].to, PeripheralStatus::Stale);
    }

    #[test]
    fn departed_then_rejoins() {
        let cfg = RegistryConfig::default();
        let mut r = Registry::new(cfg);
        r.ingest(&packet(0), 0);
        let now = cfg.departure_timeout_ms + 1;
        let swept = r.sweep(now);
        assert_eq!(swept.last().unwrap().to, PeripheralStatus::Departed);
        let (v, t) = r.ingest(&packet(1), now + 5);
        assert_eq!(v, IngestVerdict::Fresh);
        let t = t.unwrap();
        assert_eq!((t.from, t.to), (Some(PeripheralStatus::Departed), PeripheralStatus::Active));
    }
}
