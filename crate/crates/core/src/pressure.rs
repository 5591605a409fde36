//! Load signals, centre of pressure and occupancy for pressure grids.

use crate::wire::PressureFramePayload;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

pub const DEFAULT_SMOOTHING_WINDOW: usize = 5;

/// Causal moving average. During warm-up the mean is taken over the samples
/// seen so far, so a constant input is reproduced exactly from the start.
#[derive(Debug, Clone)]
pub struct MovingAverage {
    window: usize,
    buf: VecDeque<f64>,
}

impl MovingAverage {
    pub fn new(window: usize) -> Self {
        assert!(window > 0, "smoothing window must be positive");
        Self { window, buf: VecDeque::with_capacity(window) }
    }

    pub fn push(&mut self, x: f64) -> f64 {
        if self.buf.len() == self.window {
            self.buf.pop_front();
        }
        self.buf.push_back(x);
        // summed in arrival order so batch and streaming agree bit for bit
        self.buf.iter().sum::<f64>() / self.buf.len() as f64
    }

    pub fn reset(&mut self) {
        self.buf.clear();
    }
}

/// Smoothed per-frame total load, with the timestamps passed through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSignal {
    pub t_ms: Vec<u64>,
    pub load: Vec<f64>,
}

/// Smooths the total load of a timestamped frame sequence.
pub fn smooth(frames: &[(u64, &PressureFramePayload)], window: usize) -> LoadSignal {
    let totals: Vec<f64> = frames.iter().map(|(_, f)| f.total()).collect();
    LoadSignal { t_ms: frames.iter().map(|(t, _)| *t).collect(), load: smooth_values(&totals, window) }
}

pub fn smooth_values(values: &[f64], window: usize) -> Vec<f64> {
    let mut ma = MovingAverage::new(window);
    values.iter().map(|&v| ma.push(v)).collect()
}

/// Centre of pressure in grid units (x = column, y = row).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoP {
    pub x: f64,
    pub y: f64,
    pub valid: bool,
}

impl CoP {
    pub const INVALID: CoP = CoP { x: 0.0, y: 0.0, valid: false };
}

/// Pressure-weighted centroid; invalid when the frame's total load is below
/// `activation_floor`.
pub fn compute_cop(frame: &PressureFramePayload, activation_floor: f64) -> CoP {
    let (rows, cols) = (frame.rows as usize, frame.cols as usize);
    let mut col_sums = vec![0.0f64; cols];
    let mut row_sums = vec![0.0f64; rows];
    for (r, row) in frame.cells.chunks_exact(cols).enumerate() {
        for (c, &p) in row.iter().enumerate() {
            col_sums[c] += p as f64;
            row_sums[r] += p as f64;
        }
    }
    let total: f64 = row_sums.iter().sum();
    if total < activation_floor || total <= 0.0 {
        return CoP::INVALID;
    }
    let mx: f64 = col_sums.iter().enumerate().map(|(j, s)| j as f64 * s).sum();
    let my: f64 = row_sums.iter().enumerate().map(|(i, s)| i as f64 * s).sum();
    CoP {
        x: (mx / total).clamp(0.0, (cols - 1) as f64),
        y: (my / total).clamp(0.0, (rows - 1) as f64),
        valid: true,
    }
}

/// Result of dividing a floor-mat frame into left and right foot regions.
#[derive(Debug, Clone, PartialEq)]
pub struct FootSplit {
    /// First column belonging to the right region.
    pub split_col: usize,
    /// `true` when no zero-pressure valley separated two regions.
    pub midline_fallback: bool,
    /// Full-size frames with the other side's columns zeroed.
    pub left: PressureFramePayload,
    pub right: PressureFramePayload,
    pub left_cop: CoP,
    pub right_cop: CoP,
}

impl FootSplit {
    pub fn left_load(&self) -> f64 {
        self.left.total()
    }

    pub fn right_load(&self) -> f64 {
        self.right.total()
    }
}

/// Splits a mat frame at the widest zero-pressure column valley between the
/// two heaviest connected loaded regions, or at the midline if there is none.
pub fn split_feet(frame: &PressureFramePayload, activation_floor: f64) -> FootSplit {
    let (rows, cols) = (frame.rows as usize, frame.cols as usize);
    let split_col = valley_split(frame);
    let (split_col, midline_fallback) = match split_col {
        Some(c) => (c, false),
        None => ((cols / 2).max(1).min(cols), true),
    };
    let mut left = PressureFramePayload::zeros(frame.rows, frame.cols);
    let mut right = PressureFramePayload::zeros(frame.rows, frame.cols);
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c < split_col {
                left.cells[i] = frame.cells[i];
            } else {
                right.cells[i] = frame.cells[i];
            }
        }
    }
    let left_cop = compute_cop(&left, activation_floor);
    let right_cop = compute_cop(&right, activation_floor);
    FootSplit { split_col, midline_fallback, left, right, left_cop, right_cop }
}

struct Region {
    load: f64,
    min_col: usize,
    max_col: usize,
}

fn loaded_regions(frame: &PressureFramePayload) -> Vec<Region> {
    let (rows, cols) = (frame.rows as usize, frame.cols as usize);
    let mut seen = vec![false; rows * cols];
    let mut regions = Vec::new();
    let mut stack = Vec::new();
    for start in 0..rows * cols {
        if seen[start] || frame.cells[start] <= 0.0 {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut region = Region { load: 0.0, min_col: usize::MAX, max_col: 0 };
        while let Some(i) = stack.pop() {
            let (r, c) = (i / cols, i % cols);
            region.load += frame.cells[i] as f64;
            region.min_col = region.min_col.min(c);
            region.max_col = region.max_col.max(c);
            let mut visit = |j: usize| {
                if !seen[j] && frame.cells[j] > 0.0 {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if r > 0 {
                visit(i - cols);
            }
            if r + 1 < rows {
                visit(i + cols);
            }
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < cols {
                visit(i + 1);
            }
        }
        regions.push(region);
    }
    regions
}

fn valley_split(frame: &PressureFramePayload) -> Option<usize> {
    let cols = frame.cols as usize;
    let mut regions = loaded_regions(frame);
    if regions.len() < 2 {
        return None;
    }
    regions.sort_by(|a, b| b.load.total_cmp(&a.load));
    let (a, b) = (&regions[0], &regions[1]);
    let (first, second) = if a.min_col <= b.min_col { (a, b) } else { (b, a) };
    if first.max_col >= second.min_col {
        return None;
    }
    let col_empty = |c: usize| (0..frame.rows as usize).all(|r| frame.cells[r * cols + c] <= 0.0);
    // widest run of empty columns strictly between the two regions
    let mut best: Option<(usize, usize)> = None;
    let mut run_start = None;
    for c in first.max_col + 1..=second.min_col {
        let empty = c < second.min_col && col_empty(c);
        match (empty, run_start) {
            (true, None) => run_start = Some(c),
            (false, Some(s)) => {
                let len = c - s;
                if best.is_none_or(|(_, l)| len > l) {
                    best = Some((s, len));
                }
                run_start = None;
            }
            _ => {}
        }
    }
    best.map(|(s, len)| s + len / 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Occupancy {
    Loaded,
    Unloaded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupancyState {
    pub state: Occupancy,
    pub since_ms: u64,
}

impl OccupancyState {
    pub fn unloaded(at_ms: u64) -> Self {
        Self { state: Occupancy::Unloaded, since_ms: at_ms }
    }
}

/// Hysteresis thresholds in absolute load units; `load_on > load_off`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupancyThresholds {
    pub load_on: f64,
    pub load_off: f64,
}

impl OccupancyThresholds {
    pub fn new(load_on: f64, load_off: f64) -> Self {
        assert!(load_on > load_off, "hysteresis needs load_on > load_off");
        Self { load_on, load_off }
    }

    /// Thresholds as fractions of a calibrated seated baseline.
    pub fn from_baseline(baseline: f64, on_frac: f64, off_frac: f64) -> Self {
        Self::new(baseline * on_frac, baseline * off_frac)
    }
}

pub fn occupancy_step(state: OccupancyState, load: f64, thresholds: OccupancyThresholds, now_ms: u64) -> OccupancyState {
    match state.state {
        Occupancy::Unloaded if load > thresholds.load_on => OccupancyState { state: Occupancy::Loaded, since_ms: now_ms },
        Occupancy::Loaded if load < thresholds.load_off => OccupancyState { state: Occupancy::Unloaded, since_ms: now_ms },
        _ => state,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(rows: u8, cols: u8, loaded: &[(usize, usize, f32)]) -> PressureFramePayload {
        let mut f = PressureFramePayload::zeros(rows, cols);
        for &(r, c, p) in loaded {
            f.cells[r * cols as usize + c] = p;
        }
        f
    }

    #[test]
    fn constant_signal_preserved() {
        let out = smooth_values(&[3.5; 20], 5);
        assert!(out.iter().all(|&v| v == 3.5));
    }

    #[test]
    fn impulse_response() {
        let mut x = vec![0.0; 20];
        x[8] = 1.0;
        let out = smooth_values(&x, 5);
        for (i, v) in out.iter().enumerate() {
            let expected = if (8..=12).contains(&i) { 0.2 } else { 0.0 };
            assert!((v - expected).abs() < 1e-12, "i={i} v={v}");
        }
    }

    #[test]
    fn plateau_has_no_dc_error() {
        let mut x = vec![0.0; 10];
        x.extend([7.0; 30]);
        let out = smooth_values(&x, 5);
        assert!(out[20..].iter().all(|&v| (v - 7.0).abs() < 1e-12));
    }

    #[test]
    fn point_mass_cop() {
        let cop = compute_cop(&frame(5, 6, &[(2, 3, 10.0)]), 1.0);
        assert!(cop.valid);
        assert_eq!((cop.x, cop.y), (3.0, 2.0));
    }

    #[test]
    fn uniform_cop_is_centre() {
        let f = PressureFramePayload { rows: 4, cols: 4, cells: vec![1.0; 16] };
        let cop = compute_cop(&f, 1.0);
        assert!((cop.x - 1.5).abs() < 1e-12 && (cop.y - 1.5).abs() < 1e-12);
    }

    #[test]
    fn light_frame_is_invalid() {
        let cop = compute_cop(&frame(4, 4, &[(1, 1, 0.5)]), 1.0);
        assert!(!cop.valid);
    }

    #[test]
    fn two_blobs_split_in_valley() {
        let mut cells = Vec::new();
        for r in 0..4 {
            for c in 0..3 {
                cells.push((r, c, 2.0));
                cells.push((r, c + 6, 3.0));
            }
        }
        let f = frame(4, 9, &cells);
        let s = split_feet(&f, 1.0);
        assert!(!s.midline_fallback);
        assert!((3..=5).contains(&s.split_col));
        assert_eq!(s.split_col, 4);
        assert!((s.left_cop.x - 1.0).abs() < 1e-12);
        assert!((s.right_cop.x - 7.0).abs() < 1e-12);
        assert!((s.left_load() - 24.0).abs() < 1e-9);
        assert!((s.right_load() - 36.0).abs() < 1e-9);
    }

    #[test]
    fn single_blob_falls_back_to_midline() {
        let cells: Vec<_> = (0..4).flat_map(|r| (2..6).map(move |c| (r, c, 1.0))).collect();
        let s = split_feet(&frame(4, 8, &cells), 1.0);
        assert!(s.midline_fallback);
        assert_eq!(s.split_col, 4);
        assert_eq!(s.left_load(), s.right_load());
    }

    #[test]
    fn empty_mat_has_invalid_feet() {
        let s = split_feet(&PressureFramePayload::zeros(6, 10), 1.0);
        assert!(!s.left_cop.valid && !s.right_cop.valid);
    }

    #[test]
    fn hysteresis_ramp_single_transition() {
        let th = OccupancyThresholds::from_baseline(100.0, 0.30, 0.15);
        let mut st = OccupancyState::unloaded(0);
        let mut transitions = vec![];
        for i in 0..=100u64 {
            let next = occupancy_step(st, i as f64, th, i);
            if next.state != st.state {
                transitions.push(i);
            }
            st = next;
        }
        assert_eq!(transitions, vec![31]);
    }

    #[test]
    fn inside_band_never_switches() {
        let th = OccupancyThresholds::from_baseline(100.0, 0.30, 0.15);
        for start in [Occupancy::Loaded, Occupancy::Unloaded] {
            let mut st = OccupancyState { state: start, since_ms: 0 };
            for i in 0..50u64 {
                st = occupancy_step(st, if i % 2 == 0 { 20.0 } else { 25.0 }, th, i);
                assert_eq!(st.state, start);
            }
        }
    }

    #[test]
    fn zero_load_stays_unloaded() {
        let th = OccupancyThresholds::from_baseline(100.0, 0.30, 0.15);
        let mut st = OccupancyState::unloaded(0);
        for i in 0..100 {
            st = occupancy_step(st, 0.0, th, i);
        }
        assert_eq!(st.state, Occupancy::Unloaded);
    }

    proptest! {
        #[test]
        fn occupancy_transitions_alternate(loads in proptest::collection::vec(0.0f64..120.0, 1..200)) {
            let th = OccupancyThresholds::from_baseline(100.0, 0.30, 0.15);
            let mut st = OccupancyState::unloaded(0);
            let mut last_edge: Option<Occupancy> = None;
            for (i, l) in loads.iter().enumerate() {
                let next = occupancy_step(st, *l, th, i as u64);
                if next.state != st.state {
                    prop_assert_ne!(Some(next.state), last_edge);
                    last_edge = Some(next.state);
                }
                st = next;
            }
        }

        #[test]
        fn smoothing_is_causal(x in proptest::collection::vec(0.0f64..100.0, 2..80), cut in 1usize..80) {
            let cut = cut.min(x.len());
            let full = smooth_values(&x, 5);
            let prefix = smooth_values(&x[..cut], 5);
            prop_assert_eq!(&full[..cut], &prefix[..]);
        }
    }
}
