//! Single/double classification.
//!
//! Two consecutive valid records whose gap (end of the first to start of the
//! second) is at most `double_gap_s` form a double. Pairing is greedy from
//! the left and non-overlapping; an unpaired record becomes a single once
//! the gap has elapsed with no successor.

use super::DetectionConfig;
use serde::{Deserialize, Serialize};

pub trait TimedRecord {
    fn start_ms(&self) -> u64;
    fn end_ms(&self) -> u64;
}

impl TimedRecord for super::CycleRecord {
    fn start_ms(&self) -> u64 {
        self.start_ms
    }
    fn end_ms(&self) -> u64 {
        self.end_ms
    }
}

impl TimedRecord for super::LiftRecord {
    fn start_ms(&self) -> u64 {
        self.start_ms
    }
    fn end_ms(&self) -> u64 {
        self.end_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Paired<R> {
    Single(R),
    Double(R, R),
}

impl<R: TimedRecord> Paired<R> {
    pub fn start_ms(&self) -> u64 {
        match self {
            Paired::Single(r) | Paired::Double(r, _) => r.start_ms(),
        }
    }

    pub fn end_ms(&self) -> u64 {
        match self {
            Paired::Single(r) | Paired::Double(_, r) => r.end_ms(),
        }
    }

    pub fn duration_s(&self) -> f64 {
        (self.end_ms() - self.start_ms()) as f64 / 1000.0
    }
}

#[derive(Debug, Clone)]
pub struct PairingClassifier<R> {
    gap_ms: u64,
    pending: Option<R>,
}

impl<R: TimedRecord> PairingClassifier<R> {
    pub fn new(config: &DetectionConfig) -> Self {
        Self { gap_ms: config.double_gap_ms(), pending: None }
    }

    pub fn pending(&self) -> Option<&R> {
        self.pending.as_ref()
    }

    /// Feeds a newly completed record.
    pub fn push(&mut self, record: R) -> Vec<Paired<R>> {
        let mut out = Vec::new();
        match self.pending.take() {
            Some(first) if record.start_ms().saturating_sub(first.end_ms()) <= self.gap_ms => {
                out.push(Paired::Double(first, record));
            }
            Some(first) => {
                out.push(Paired::Single(first));
                self.pending = Some(record);
            }
            None => self.pending = Some(record),
        }
        out
    }

    /// Releases a pending record as a single once the gap has elapsed.
    pub fn poll(&mut self, now_ms: u64) -> Option<Paired<R>> {
        if self.pending.as_ref().is_some_and(|p| now_ms.saturating_sub(p.end_ms()) > self.gap_ms) {
            self.pending.take().map(Paired::Single)
        } else {
            None
        }
    }

    /// Ends the stream: any pending record is a single.
    pub fn flush(&mut self) -> Option<Paired<R>> {
        self.pending.take().map(Paired::Single)
    }
}

/// Batch classification of chronologically ordered records.
pub fn classify_pairing<R: TimedRecord + Clone>(records: &[R], config: &DetectionConfig) -> Vec<Paired<R>> {
    let gap = config.double_gap_ms();
    let mut out = Vec::new();
    let mut i = 0;
    while i < records.len() {
        let first = &records[i];
        match records.get(i + 1) {
            Some(next) if next.start_ms().saturating_sub(first.end_ms()) <= gap => {
                out.push(Paired::Double(first.clone(), next.clone()));
                i += 2;
            }
            _ => {
                out.push(Paired::Single(first.clone()));
                i += 1;
            }
        }
    }
    out
}
