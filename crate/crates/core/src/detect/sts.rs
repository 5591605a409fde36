//! Streaming sit-to-stand stage machine.
//!
//! Stage edges:
//!
//! | from | to | condition |
//! |------|----|-----------|
//! | S0 | S1 | smoothed seat fraction below `seat_unload_pct` |
//! | S1 | S0 | seat occupancy back to Loaded (repositioning) |
//! | S1 | S2 | mat fraction above `mat_load_pct` continuously for `hold_window_s` |
//! | S2 | S3 | mat fraction at or below `mat_load_pct` |
//! | S3 | S2 | mat fraction above `mat_load_pct` again |
//! | S3 | S4 | seat occupancy Loaded and the raw seat load has stopped rising |
//! | S4 | S0 | immediately, emitting the cycle if its duration is in bounds |
//!
//! At most one data-driven edge fires per sample (S4 to S0 is the exception).
//! The cycle is anchored at the start of the monotone seat-unloading ramp that
//! led into S1 and at the last rising sample of the reloading ramp.

use super::{BalanceLeaning, DetectionConfig, Stage, StageState};
use crate::pressure::{occupancy_step, MovingAverage, Occupancy, OccupancyState, OccupancyThresholds};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// One time-aligned station sample. Loads are fractions of the calibrated
/// seated baseline, unsmoothed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StationSample {
    pub t_ms: u64,
    pub seat: f64,
    pub mat: f64,
    pub arm_left: f64,
    pub arm_right: f64,
    pub feet_left: f64,
    pub feet_right: f64,
}

/// Detector input after smoothing and occupancy tracking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StsInput {
    pub t_ms: u64,
    pub seat_raw: f64,
    pub seat: f64,
    pub occupancy: Occupancy,
    pub mat: f64,
    pub arm_left: f64,
    pub arm_right: f64,
    pub feet_left: f64,
    pub feet_right: f64,
}

/// Smoothing and hysteresis in front of the stage machine.
#[derive(Debug, Clone)]
pub struct Conditioner {
    seat: MovingAverage,
    mat: MovingAverage,
    arm_left: MovingAverage,
    arm_right: MovingAverage,
    occupancy: Option<OccupancyState>,
    thresholds: OccupancyThresholds,
}

impl Conditioner {
    pub fn new(config: &DetectionConfig) -> Self {
        let w = config.smoothing_window;
        Self {
            seat: MovingAverage::new(w),
            mat: MovingAverage::new(w),
            arm_left: MovingAverage::new(w),
            arm_right: MovingAverage::new(w),
            occupancy: None,
            thresholds: OccupancyThresholds::from_baseline(
                1.0,
                config.occupancy_on_pct / 100.0,
                config.occupancy_off_pct / 100.0,
            ),
        }
    }

    pub fn push(&mut self, s: &StationSample) -> StsInput {
        let seat = self.seat.push(s.seat);
        let prev = self.occupancy.unwrap_or(OccupancyState::unloaded(s.t_ms));
        let occ = occupancy_step(prev, seat, self.thresholds, s.t_ms);
        self.occupancy = Some(occ);
        StsInput {
            t_ms: s.t_ms,
            seat_raw: s.seat,
            seat,
            occupancy: occ.state,
            mat: self.mat.push(s.mat),
            arm_left: self.arm_left.push(s.arm_left),
            arm_right: self.arm_right.push(s.arm_right),
            feet_left: s.feet_left,
            feet_right: s.feet_right,
        }
    }
}

/// A completed, validated sit-to-stand cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub start_ms: u64,
    pub end_ms: u64,
    pub balance_leaning: BalanceLeaning,
    /// `1 - |L - R| / (L + R)` over the rising stage; absent with no foot load.
    pub symmetry: Option<f64>,
}

impl CycleRecord {
    pub fn duration_s(&self) -> f64 {
        (self.end_ms - self.start_ms) as f64 / 1000.0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StsStep {
    /// Stage edges taken on this sample, in order.
    pub transitions: Vec<(Stage, Stage)>,
    pub record: Option<CycleRecord>,
    /// A cycle reached S4 but fell outside the duration bounds.
    pub discarded: Option<CycleRecord>,
}

#[derive(Debug, Clone)]
pub struct StsDetector {
    config: DetectionConfig,
    state: StageState,
    mat_above_since: Option<u64>,
    /// Raw seat fractions since the last S0 entry.
    history: VecDeque<(u64, f64)>,
    cycle_start_ms: u64,
    lean_left: bool,
    lean_right: bool,
    feet_left_sum: f64,
    feet_right_sum: f64,
}

impl StsDetector {
    pub fn new(config: DetectionConfig) -> Self {
        Self {
            config,
            state: StageState { stage: Stage::S0Seated, entered_at_ms: 0 },
            mat_above_since: None,
            history: VecDeque::new(),
            cycle_start_ms: 0,
            lean_left: false,
            lean_right: false,
            feet_left_sum: 0.0,
            feet_right_sum: 0.0,
        }
    }

    pub fn state(&self) -> StageState {
        self.state
    }

    pub fn config(&self) -> &DetectionConfig {
        &self.config
    }

    fn enter(&mut self, to: Stage, at_ms: u64, out: &mut StsStep) {
        debug_assert!(Stage::is_legal_edge(self.state.stage, to), "{:?} -> {to:?}", self.state.stage);
        out.transitions.push((self.state.stage, to));
        self.state = StageState { stage: to, entered_at_ms: at_ms };
    }

    /// Walks back from the newest history sample along the strictly
    /// decreasing seat ramp, bounded by `max_cycle_s`.
    fn ramp_start(&self) -> u64 {
        let max_ms = self.config.max_cycle_ms();
        let mut k = self.history.len() - 1;
        let t_entry = self.history[k].0;
        while k > 0 {
            let (t_prev, prev) = self.history[k - 1];
            if t_entry - t_prev > max_ms || prev <= self.history[k].1 {
                break;
            }
            k -= 1;
        }
        self.history[k].0
    }

    pub fn step(&mut self, input: &StsInput) -> StsStep {
        let mut out = StsStep::default();
        let t = input.t_ms;
        let unload = self.config.seat_unload_pct / 100.0;
        let mat_on = self.config.mat_load_pct / 100.0;
        let lean = self.config.armrest_lean_pct / 100.0;
        let hold_ms = self.config.hold_ms();

        let prev_raw = self.history.back().map(|&(_, v)| v);
        self.history.push_back((t, input.seat_raw));

        if input.mat > mat_on {
            self.mat_above_since.get_or_insert(t);
        } else {
            self.mat_above_since = None;
        }

        match self.state.stage {
            Stage::S0Seated => {
                if input.seat < unload {
                    self.cycle_start_ms = self.ramp_start();
                    self.lean_left = false;
                    self.lean_right = false;
                    self.feet_left_sum = 0.0;
                    self.feet_right_sum = 0.0;
                    self.enter(Stage::S1Rising, t, &mut out);
                }
            }
            Stage::S1Rising => {
                if input.occupancy == Occupancy::Loaded {
                    self.enter(Stage::S0Seated, t, &mut out);
                } else if self.mat_above_since.is_some_and(|since| t - since >= hold_ms) {
                    self.enter(Stage::S2Standing, t, &mut out);
                }
            }
            Stage::S2Standing => {
                if input.mat <= mat_on {
                    self.enter(Stage::S3Lowering, t, &mut out);
                }
            }
            Stage::S3Lowering => {
                let settled = prev_raw.is_some_and(|p| input.seat_raw <= p);
                if input.occupancy == Occupancy::Loaded && settled {
                    let end_ms = self.history[self.history.len() - 2].0;
                    let record = CycleRecord {
                        start_ms: self.cycle_start_ms,
                        end_ms,
                        balance_leaning: BalanceLeaning::from_flags(self.lean_left, self.lean_right),
                        symmetry: crate::metrics::symmetry_index(self.feet_left_sum, self.feet_right_sum),
                    };
                    self.enter(Stage::S4CycleComplete, t, &mut out);
                    if self.config.duration_ok(end_ms - self.cycle_start_ms) {
                        out.record = Some(record);
                    } else {
                        out.discarded = Some(record);
                    }
                    self.enter(Stage::S0Seated, t, &mut out);
                } else if input.mat > mat_on {
                    self.enter(Stage::S2Standing, t, &mut out);
                }
            }
            Stage::S4CycleComplete => unreachable!("S4 is left within the same step"),
        }

        if self.state.stage == Stage::S0Seated && !out.transitions.is_empty() {
            // new S0 period: ramps never extend before this sample
            self.history.clear();
            self.history.push_back((t, input.seat_raw));
        } else if self.state.stage == Stage::S0Seated {
            let max_ms = self.config.max_cycle_ms();
            while self.history.front().is_some_and(|&(t0, _)| t - t0 > max_ms) {
                self.history.pop_front();
            }
        } else {
            // past S0 only the previous sample is needed
            while self.history.len() > 2 {
                self.history.pop_front();
            }
        }

        match self.state.stage {
            Stage::S1Rising => {
                self.feet_left_sum += input.feet_left;
                self.feet_right_sum += input.feet_right;
                self.lean_left |= input.arm_left > lean;
                self.lean_right |= input.arm_right > lean;
            }
            Stage::S3Lowering => {
                self.lean_left |= input.arm_left > lean;
                self.lean_right |= input.arm_right > lean;
            }
            _ => {}
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{offline_segment, StationTrace};
    use proptest::prelude::*;

    /// Noise-free seat/mat trajectory sampled at 20 Hz: seated `pre` s,
    /// linear ramps of `ramp` s, standing `stand` s, seated `post` s.
    fn cycle_trace(pre: f64, ramp: f64, stand: f64, post: f64) -> Vec<StationSample> {
        let dt = 0.05;
        let total = pre + ramp + stand + ramp + post;
        let n = (total / dt).round() as usize;
        (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                let mat = if t < pre {
                    0.0
                } else if t < pre + ramp {
                    (t - pre) / ramp
                } else if t < pre + ramp + stand {
                    1.0
                } else if t < pre + 2.0 * ramp + stand {
                    1.0 - (t - pre - ramp - stand) / ramp
                } else {
                    0.0
                };
                StationSample {
                    t_ms: (t * 1000.0).round() as u64,
                    seat: 1.0 - mat,
                    mat,
                    feet_left: mat / 2.0,
                    feet_right: mat / 2.0,
                    ..Default::default()
                }
            })
            .collect()
    }

    fn run(samples: &[StationSample], cfg: &DetectionConfig) -> (Vec<(Stage, Stage)>, Vec<CycleRecord>) {
        let mut cond = Conditioner::new(cfg);
        let mut det = StsDetector::new(cfg.clone());
        let mut edges = vec![];
        let mut recs = vec![];
        for s in samples {
            let step = det.step(&cond.push(s));
            edges.extend(step.transitions);
            recs.extend(step.record);
        }
        (edges, recs)
    }

    #[test]
    fn clean_cycle_walks_all_stages() {
        let cfg = DetectionConfig::default();
        let (edges, recs) = run(&cycle_trace(5.0, 2.0, 3.0, 5.0), &cfg);
        use Stage::*;
        assert_eq!(
            edges,
            vec![
                (S0Seated, S1Rising),
                (S1Rising, S2Standing),
                (S2Standing, S3Lowering),
                (S3Lowering, S4CycleComplete),
                (S4CycleComplete, S0Seated)
            ]
        );
        assert_eq!(recs.len(), 1);
        assert!((recs[0].duration_s() - 7.0).abs() <= 0.05, "{}", recs[0].duration_s());
        assert_eq!(recs[0].symmetry, Some(1.0));
    }

    #[test]
    fn repositioning_aborts() {
        let cfg = DetectionConfig::default();
        // brief rise: mat is above 70% for well under a second
        let (edges, recs) = run(&cycle_trace(5.0, 0.6, 0.3, 5.0), &cfg);
        assert!(recs.is_empty());
        assert!(edges.contains(&(Stage::S1Rising, Stage::S0Seated)));
    }

    #[test]
    fn slow_stand_rejected() {
        let cfg = DetectionConfig::default();
        let (_, recs) = run(&cycle_trace(5.0, 2.0, 21.0, 5.0), &cfg);
        assert!(recs.is_empty());
    }

    #[test]
    fn armrest_lean_flags() {
        let cfg = DetectionConfig::default();
        let mut samples = cycle_trace(5.0, 2.0, 3.0, 5.0);
        for s in &mut samples {
            if s.mat > 0.0 && s.mat < 1.0 {
                s.arm_right = 0.3;
            }
        }
        let (_, recs) = run(&samples, &cfg);
        assert_eq!(recs[0].balance_leaning, BalanceLeaning::Right);
    }

    fn trace_of(samples: &[StationSample]) -> StationTrace {
        StationTrace::from_samples(samples)
    }

    prop_compose! {
        fn piecewise()(levels in proptest::collection::vec((0.0f64..1.1, 1usize..60, 0.0f64..1.1), 1..12))
            -> Vec<StationSample> {
            let mut out = vec![];
            let mut seat: f64 = 1.0;
            let mut mat: f64 = 0.0;
            for (target_seat, len, target_mat) in levels {
                let (s0, m0) = (seat, mat);
                for i in 0..len {
                    let f = (i + 1) as f64 / len as f64;
                    seat = s0 + (target_seat - s0) * f;
                    mat = m0 + (target_mat - m0) * f;
                    let t_ms = out.len() as u64 * 50;
                    out.push(StationSample { t_ms, seat, mat, arm_left: mat * 0.2, ..Default::default() });
                }
            }
            out
        }
    }

    proptest! {
        #[test]
        fn only_legal_edges(samples in piecewise()) {
            let (edges, recs) = run(&samples, &DetectionConfig::default());
            for (a, b) in edges {
                prop_assert!(Stage::is_legal_edge(a, b));
            }
            for r in recs {
                prop_assert!(r.duration_s() >= 1.5 && r.duration_s() <= 20.0);
            }
        }

        #[test]
        fn streaming_matches_offline(samples in piecewise()) {
            let cfg = DetectionConfig::default();
            let (_, streaming) = run(&samples, &cfg);
            let offline = offline_segment(&trace_of(&samples), &cfg);
            prop_assert_eq!(streaming, offline);
        }
    }
}
