//! Transport fault injection.
//!
//! Fault profiles are TOML:
//!
//! ```toml
//! loss_prob = 0.05
//! jitter_ms = 100
//! reorder_prob = 0.01
//!
//! [[dropout]]
//! peripheral = "mat:0"
//! start_s = 30.0
//! end_s = 45.0
//! ```

use super::generate::TimedPacket;
use crate::wire::{PeripheralId, PeripheralPacket};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid fault profile: {0}")]
pub struct FaultError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropoutWindow {
    pub peripheral: String,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaultProfile {
    pub loss_prob: f64,
    pub jitter_ms: u64,
    pub reorder_prob: f64,
    #[serde(rename = "dropout")]
    pub dropout_windows: Vec<DropoutWindow>,
}

impl FaultProfile {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn from_toml(text: &str) -> Result<Self, FaultError> {
        let p: FaultProfile = toml::from_str(text).map_err(|e| FaultError(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), FaultError> {
        for (name, p) in [("loss_prob", self.loss_prob), ("reorder_prob", self.reorder_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(FaultError(format!("{name} must lie in [0, 1]")));
            }
        }
        let mut by_peripheral: BTreeMap<PeripheralId, Vec<(f64, f64)>> = BTreeMap::new();
        for w in &self.dropout_windows {
            let id: PeripheralId =
                w.peripheral.parse().map_err(|_| FaultError(format!("unknown peripheral `{}`", w.peripheral)))?;
            if !(w.start_s >= 0.0 && w.end_s > w.start_s) {
                return Err(FaultError(format!("dropout window for {id} must have 0 <= start < end")));
            }
            by_peripheral.entry(id).or_default().push((w.start_s, w.end_s));
        }
        for (id, windows) in &mut by_peripheral {
            windows.sort_by(|a, b| a.0.total_cmp(&b.0));
            if windows.windows(2).any(|p| p[1].0 < p[0].1) {
                return Err(FaultError(format!("dropout windows for {id} overlap")));
            }
        }
        Ok(())
    }

    fn dropped_out(&self, id: PeripheralId, t_ms: u64) -> bool {
        let t = t_ms as f64 / 1000.0;
        self.dropout_windows
            .iter()
            .any(|w| w.peripheral.parse::<PeripheralId>().is_ok_and(|p| p == id) && t >= w.start_s && t < w.end_s)
    }
}

/// A packet with its arrival time at the hub, scenario milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delivery {
    pub arrival_ms: u64,
    pub packet: PeripheralPacket,
}

/// Interleaves per-peripheral streams by emission time (stable across peripherals).
pub fn merge_streams(streams: &BTreeMap<PeripheralId, Vec<TimedPacket>>) -> Vec<TimedPacket> {
    let mut all: Vec<TimedPacket> = streams.values().flatten().cloned().collect();
    all.sort_by_key(|p| p.t_ms);
    all
}

pub fn apply_faults(
    streams: &BTreeMap<PeripheralId, Vec<TimedPacket>>,
    profile: &FaultProfile,
    seed: u64,
) -> Vec<Delivery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_fa17);
    let mut out: Vec<Delivery> = Vec::new();
    for tp in merge_streams(streams) {
        if profile.dropped_out(tp.packet.id, tp.t_ms) {
            continue;
        }
        if profile.loss_prob > 0.0 && rng.random::<f64>() < profile.loss_prob {
            continue;
        }
        let delay = if profile.jitter_ms > 0 { rng.random_range(0..=profile.jitter_ms) } else { 0 };
        out.push(Delivery { arrival_ms: tp.t_ms + delay, packet: tp.packet });
    }
    if profile.reorder_prob > 0.0 {
        let mut i = 0;
        while i + 1 < out.len() {
            if rng.random::<f64>() < profile.reorder_prob {
                let (a, b) = (out[i].arrival_ms, out[i + 1].arrival_ms);
                out[i].arrival_ms = b;
                out[i + 1].arrival_ms = a;
                out.swap(i, i + 1);
                i += 2;
            } else {
                i += 1;
            }
        }
    }
    out.sort_by_key(|d| d.arrival_ms);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::{Payload, PeripheralKind};

    fn streams(n: u32) -> BTreeMap<PeripheralId, Vec<TimedPacket>> {
        let mut m = BTreeMap::new();
        for kind in [PeripheralKind::SeatCushion, PeripheralKind::FloorMat] {
            let id = PeripheralId::new(kind, 0);
            let v = (0..n)
                .map(|i| TimedPacket {
                    t_ms: i as u64 * 50,
                    packet: PeripheralPacket { id, seq: i, device_time_ms: i as u64 * 50, payload: Payload::Heartbeat },
                })
                .collect();
            m.insert(id, v);
        }
        m
    }

    #[test]
    fn identity_profile() {
        let s = streams(100);
        let d = apply_faults(&s, &FaultProfile::none(), 7);
        let merged = merge_streams(&s);
        assert_eq!(d.len(), merged.len());
        for (d, m) in d.iter().zip(&merged) {
            assert_eq!((d.arrival_ms, &d.packet), (m.t_ms, &m.packet));
        }
    }

    #[test]
    fn total_loss() {
        let p = FaultProfile { loss_prob: 1.0, ..Default::default() };
        assert!(apply_faults(&streams(100), &p, 7).is_empty());
    }

    #[test]
    fn binomial_loss_within_three_sigma() {
        let p = FaultProfile { loss_prob: 0.1, ..Default::default() };
        let delivered = apply_faults(&streams(5000), &p, 11).len() as f64;
        let (n, q) = (10_000.0, 0.1);
        let sigma = (n * q * (1.0 - q) as f64).sqrt();
        assert!((delivered - n * (1.0 - q)).abs() <= 3.0 * sigma, "{delivered}");
    }

    #[test]
    fn jitter_bounded_and_deterministic() {
        let p = FaultProfile { jitter_ms: 100, reorder_prob: 0.05, ..Default::default() };
        let a = apply_faults(&streams(200), &p, 3);
        assert_eq!(a, apply_faults(&streams(200), &p, 3));
        assert!(a.windows(2).all(|w| w[0].arrival_ms <= w[1].arrival_ms));
    }

    #[test]
    fn dropout_window_removes_packets() {
        let p = FaultProfile::from_toml("[[dropout]]\nperipheral = \"mat:0\"\nstart_s = 1.0\nend_s = 2.0\n").unwrap();
        let d = apply_faults(&streams(100), &p, 3);
        assert_eq!(d.len(), 180);
        assert!(!d.iter().any(|x| x.packet.id.kind == PeripheralKind::FloorMat && (1000..2000).contains(&x.arrival_ms)));
    }

    #[test]
    fn rejects_bad_profiles() {
        assert!(FaultProfile::from_toml("loss_prob = 1.5").is_err());
        let overlap = "[[dropout]]\nperipheral = \"seat:0\"\nstart_s = 0\nend_s = 5\n\
                       [[dropout]]\nperipheral = \"seat:0\"\nstart_s = 4\nend_s = 6\n";
        assert!(FaultProfile::from_toml(overlap).is_err());
    }
}
