//! Batch segmentation over complete station traces.
//!
//! Works on whole arrays: every candidate rise (a down-crossing of the seat
//! unload threshold) is paired with every candidate sit (a settled reload
//! while the mat is unloading) and the pair is accepted when the hold,
//! abort and duration criteria hold. Used to cross-check the streaming
//! stage machine.

use super::sts::{CycleRecord, StationSample};
use super::{BalanceLeaning, DetectionConfig};
use crate::metrics::symmetry_index;
use crate::pressure::{occupancy_step, smooth_values, Occupancy, OccupancyState, OccupancyThresholds};
use serde::{Deserialize, Serialize};

/// Column-oriented station trace (fractions of the seated baseline, raw).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StationTrace {
    pub t_ms: Vec<u64>,
    pub seat: Vec<f64>,
    pub mat: Vec<f64>,
    pub arm_left: Vec<f64>,
    pub arm_right: Vec<f64>,
    pub feet_left: Vec<f64>,
    pub feet_right: Vec<f64>,
}

impl StationTrace {
    pub fn from_samples(samples: &[StationSample]) -> Self {
        let mut tr = StationTrace::default();
        for s in samples {
            tr.push(s);
        }
        tr
    }

    pub fn push(&mut self, s: &StationSample) {
        self.t_ms.push(s.t_ms);
        self.seat.push(s.seat);
        self.mat.push(s.mat);
        self.arm_left.push(s.arm_left);
        self.arm_right.push(s.arm_right);
        self.feet_left.push(s.feet_left);
        self.feet_right.push(s.feet_right);
    }

    pub fn len(&self) -> usize {
        self.t_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_ms.is_empty()
    }
}

pub fn offline_segment(trace: &StationTrace, config: &DetectionConfig) -> Vec<CycleRecord> {
    let n = trace.len();
    if n == 0 {
        return Vec::new();
    }
    let w = config.smoothing_window;
    let seat = smooth_values(&trace.seat, w);
    let mat = smooth_values(&trace.mat, w);
    let arm_l = smooth_values(&trace.arm_left, w);
    let arm_r = smooth_values(&trace.arm_right, w);
    let t = &trace.t_ms;
    let raw = &trace.seat;

    let unload = config.seat_unload_pct / 100.0;
    let mat_on = config.mat_load_pct / 100.0;
    let lean = config.armrest_lean_pct / 100.0;
    let hold_ms = config.hold_ms();
    let max_ms = config.max_cycle_ms();

    let thresholds =
        OccupancyThresholds::from_baseline(1.0, config.occupancy_on_pct / 100.0, config.occupancy_off_pct / 100.0);
    let mut loaded = Vec::with_capacity(n);
    let mut occ = OccupancyState::unloaded(t[0]);
    for k in 0..n {
        occ = occupancy_step(occ, seat[k], thresholds, t[k]);
        loaded.push(occ.state == Occupancy::Loaded);
    }

    // start time of the contiguous mat-loaded run containing k
    let mut run_start: Vec<Option<u64>> = Vec::with_capacity(n);
    for k in 0..n {
        let prev = if k > 0 { run_start[k - 1] } else { None };
        run_start.push((mat[k] > mat_on).then(|| prev.unwrap_or(t[k])));
    }
    let held = |k: usize| run_start[k].is_some_and(|s| t[k] - s >= hold_ms);

    let rises: Vec<usize> = (0..n).filter(|&k| seat[k] < unload && (k == 0 || seat[k - 1] >= unload)).collect();
    let sits: Vec<usize> =
        (1..n).filter(|&j| loaded[j] && raw[j] <= raw[j - 1] && mat[j - 1] <= mat_on).collect();

    let mut records = Vec::new();
    // index at which the seated stage was last (re)entered
    let mut seated_from: Option<usize> = None;
    for &r in &rises {
        if seated_from.is_some_and(|c| r <= c) {
            continue;
        }
        let floor = seated_from.unwrap_or(0);
        let abort = (r + 1..n).find(|&k| loaded[k]);
        let hold = (r + 1..n).find(|&k| held(k));
        let h = match (abort, hold) {
            (Some(a), Some(h)) if a <= h => {
                seated_from = Some(a);
                continue;
            }
            (Some(a), None) => {
                seated_from = Some(a);
                continue;
            }
            (_, Some(h)) => h,
            (None, None) => break,
        };
        let Some(&e) = sits.iter().find(|&&j| j >= h + 2) else {
            break;
        };
        seated_from = Some(e);

        let mut k = r;
        while k > floor && t[r] - t[k - 1] <= max_ms && raw[k - 1] > raw[k] {
            k -= 1;
        }
        let start_ms = t[k];
        let end_ms = t[e - 1];
        let (mut ll, mut lr) = (false, false);
        let (mut fl, mut fr) = (0.0, 0.0);
        for k in r..h {
            fl += trace.feet_left[k];
            fr += trace.feet_right[k];
            ll |= arm_l[k] > lean;
            lr |= arm_r[k] > lean;
        }
        for k in h + 1..e {
            if mat[k] <= mat_on {
                ll |= arm_l[k] > lean;
                lr |= arm_r[k] > lean;
            }
        }
        let record = CycleRecord {
            start_ms,
            end_ms,
            balance_leaning: BalanceLeaning::from_flags(ll, lr),
            symmetry: symmetry_index(fl, fr),
        };
        if config.duration_ok(end_ms - start_ms) {
            records.push(record);
        }
    }
    records
}
