//! Reorder buffer.
//!
//! Each packet is placed on the hub timeline at `device_time + offset`, where
//! the per-peripheral offset is the smallest `receipt - device_time` seen so
//! far (the least-delayed packet best reveals the clock difference). Packets
//! are held until the hub clock is `horizon` past their timeline position,
//! then released in timeline order. Seat cushion packets get a small bias so
//! the other station peripherals' samples for the same instant come first.

use crate::wire::{PeripheralId, PeripheralKind, PeripheralPacket};
use std::collections::{BTreeMap, VecDeque};

pub const DEFAULT_HORIZON_MS: u64 = 200;
const CUSHION_BIAS_MS: i64 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Released {
    pub packet: PeripheralPacket,
    pub receipt_ms: u64,
    /// Position on the hub timeline, ms.
    pub aligned_ms: i64,
}

#[derive(Debug, Default, Clone)]
struct Lane {
    offset: Option<i64>,
    queue: VecDeque<(PeripheralPacket, u64)>,
    last_released: Option<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReorderStats {
    pub accepted: u64,
    pub late_drops: u64,
    pub released: u64,
}

#[derive(Debug, Clone)]
pub struct ReorderBuffer {
    horizon_ms: u64,
    lanes: BTreeMap<PeripheralId, Lane>,
    watermark: i64,
    stats: ReorderStats,
}

fn bias(id: PeripheralId) -> i64 {
    if id.kind == PeripheralKind::SeatCushion {
        CUSHION_BIAS_MS
    } else {
        0
    }
}

impl ReorderBuffer {
    pub fn new(horizon_ms: u64) -> Self {
        Self { horizon_ms, lanes: BTreeMap::new(), watermark: i64::MIN, stats: ReorderStats::default() }
    }

    pub fn horizon_ms(&self) -> u64 {
        self.horizon_ms
    }

    pub fn stats(&self) -> ReorderStats {
        self.stats
    }

    pub fn len(&self) -> usize {
        self.lanes.values().map(|l| l.queue.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Current clock offset estimate for a peripheral (`hub - device`, ms).
    pub fn offset(&self, id: PeripheralId) -> Option<i64> {
        self.lanes.get(&id).and_then(|l| l.offset)
    }

    /// Buffers a packet. Returns `false` (and counts a late drop) when the
    /// packet's slot on the timeline has already been released.
    pub fn push(&mut self, packet: PeripheralPacket, receipt_ms: u64) -> bool {
        let lane = self.lanes.entry(packet.id).or_default();
        let observed = receipt_ms as i64 - packet.device_time_ms as i64;
        let offset = lane.offset.map_or(observed, |o| o.min(observed));
        lane.offset = Some(offset);
        let aligned = packet.device_time_ms as i64 + offset + bias(packet.id);
        if aligned < self.watermark || lane.last_released.is_some_and(|t| packet.device_time_ms <= t) {
            self.stats.late_drops += 1;
            return false;
        }
        let at = lane.queue.partition_point(|(p, _)| p.device_time_ms <= packet.device_time_ms);
        lane.queue.insert(at, (packet, receipt_ms));
        self.stats.accepted += 1;
        true
    }

    /// Releases everything whose timeline position is at least `horizon` old.
    pub fn release(&mut self, now_ms: u64) -> Vec<Released> {
        self.watermark = self.watermark.max(now_ms as i64 - self.horizon_ms as i64);
        self.drain(self.watermark)
    }

    /// Releases everything regardless of age.
    pub fn flush(&mut self) -> Vec<Released> {
        self.drain(i64::MAX)
    }

    fn drain(&mut self, until: i64) -> Vec<Released> {
        let mut out = Vec::new();
        loop {
            let next = self
                .lanes
                .iter()
                .filter_map(|(id, lane)| {
                    let (p, _) = lane.queue.front()?;
                    Some((p.device_time_ms as i64 + lane.offset? + bias(*id), *id))
                })
                .min();
            let Some((aligned, id)) = next.filter(|(a, _)| *a <= until) else { break };
            let lane = self.lanes.get_mut(&id).expect("lane exists");
            let (packet, receipt_ms) = lane.queue.pop_front().expect("front exists");
            lane.last_released = Some(packet.device_time_ms);
            self.stats.released += 1;
            out.push(Released { packet, receipt_ms, aligned_ms: aligned });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::Payload;

    fn pkt(kind: PeripheralKind, seq: u32, t: u64) -> PeripheralPacket {
        PeripheralPacket { id: PeripheralId::new(kind, 0), seq, device_time_ms: t, payload: Payload::Heartbeat }
    }

    fn seqs(r: &[Released]) -> Vec<u32> {
        r.iter().map(|x| x.packet.seq).collect()
    }

    #[test]
    fn in_order_released_after_horizon() {
        let mut b = ReorderBuffer::new(200);
        for i in 0..5 {
            assert!(b.push(pkt(PeripheralKind::FloorMat, i, i as u64 * 50), i as u64 * 50));
        }
        assert!(b.release(150).is_empty());
        assert_eq!(seqs(&b.release(300)), vec![0, 1, 2]);
        assert_eq!(seqs(&b.release(1000)), vec![3, 4]);
    }

    #[test]
    fn adjacent_swap_corrected() {
        let mut b = ReorderBuffer::new(200);
        b.push(pkt(PeripheralKind::FloorMat, 0, 0), 0);
        b.push(pkt(PeripheralKind::FloorMat, 2, 100), 100);
        b.push(pkt(PeripheralKind::FloorMat, 1, 50), 110);
        assert_eq!(seqs(&b.release(400)), vec![0, 1, 2]);
    }

    #[test]
    fn five_hundred_ms_late_is_dropped() {
        let mut b = ReorderBuffer::new(200);
        b.push(pkt(PeripheralKind::FloorMat, 0, 0), 0);
        b.push(pkt(PeripheralKind::FloorMat, 2, 100), 100);
        b.release(350);
        assert!(!b.push(pkt(PeripheralKind::FloorMat, 1, 50), 550));
        assert_eq!(b.stats().late_drops, 1);
    }

    #[test]
    fn cushion_after_mat_of_same_tick() {
        let mut b = ReorderBuffer::new(200);
        b.push(pkt(PeripheralKind::SeatCushion, 0, 1000), 0);
        b.push(pkt(PeripheralKind::FloorMat, 0, 3000), 0);
        let out = b.release(500);
        assert_eq!(out[0].packet.id.kind, PeripheralKind::FloorMat);
        assert_eq!(out[1].packet.id.kind, PeripheralKind::SeatCushion);
    }

    #[test]
    fn offset_tracks_least_delay() {
        let mut b = ReorderBuffer::new(200);
        let id = PeripheralId::new(PeripheralKind::CanBand, 0);
        b.push(pkt(PeripheralKind::CanBand, 0, 5000), 80);
        b.push(pkt(PeripheralKind::CanBand, 1, 5050), 60);
        assert_eq!(b.offset(id), Some(60 - 5050));
    }
}
