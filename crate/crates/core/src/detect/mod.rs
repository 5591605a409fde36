//! Repetition detection: sit-to-stand stage machine, single/double pairing,
//! Can Band lift-hold-return phases, and an offline batch segmenter used as
//! an oracle for the streaming path.

mod lift;
mod offline;
mod pairing;
mod sts;

pub use lift::{LiftConfig, LiftDetector, LiftPhase, LiftRecord, LiftSample, LiftStep};
pub use offline::{offline_segment, StationTrace};
pub use pairing::{classify_pairing, Paired, PairingClassifier, TimedRecord};
pub use sts::{Conditioner, CycleRecord, StationSample, StsDetector, StsInput, StsStep};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The five stages shown to the user while a sit-to-stand is in progress.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    S0Seated,
    S1Rising,
    S2Standing,
    S3Lowering,
    S4CycleComplete,
}

impl Stage {
    pub const ALL: [Stage; 5] =
        [Stage::S0Seated, Stage::S1Rising, Stage::S2Standing, Stage::S3Lowering, Stage::S4CycleComplete];

    pub fn is_legal_edge(from: Stage, to: Stage) -> bool {
        use Stage::*;
        matches!(
            (from, to),
            (S0Seated, S1Rising)
                | (S1Rising, S2Standing)
                | (S2Standing, S3Lowering)
                | (S3Lowering, S4CycleComplete)
                | (S4CycleComplete, S0Seated)
                | (S1Rising, S0Seated)
                | (S3Lowering, S2Standing)
        )
    }

    pub fn index(self) -> u8 {
        Self::ALL.iter().position(|s| *s == self).unwrap() as u8
    }

    pub fn label(self) -> &'static str {
        match self {
            Stage::S0Seated => "seated",
            Stage::S1Rising => "rising",
            Stage::S2Standing => "standing",
            Stage::S3Lowering => "lowering",
            Stage::S4CycleComplete => "complete",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageState {
    pub stage: Stage,
    pub entered_at_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RepType {
    Single,
    Double,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RepKind {
    SitToStand,
    Lift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum BalanceLeaning {
    #[default]
    None,
    Left,
    Right,
    Both,
}

impl BalanceLeaning {
    pub fn from_flags(left: bool, right: bool) -> Self {
        match (left, right) {
            (false, false) => BalanceLeaning::None,
            (true, false) => BalanceLeaning::Left,
            (false, true) => BalanceLeaning::Right,
            (true, true) => BalanceLeaning::Both,
        }
    }

    pub fn flags(self) -> (bool, bool) {
        match self {
            BalanceLeaning::None => (false, false),
            BalanceLeaning::Left => (true, false),
            BalanceLeaning::Right => (false, true),
            BalanceLeaning::Both => (true, true),
        }
    }

    pub fn union(self, other: Self) -> Self {
        let (a, b) = self.flags();
        let (c, d) = other.flags();
        Self::from_flags(a || c, b || d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftMetrics {
    pub distance_m: f64,
    pub grip_avg_n: f64,
    pub grip_peak_n: f64,
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid detection config: {0}")]
pub struct ConfigError(pub String);

/// Detection thresholds. Percentages are relative to the calibrated seated
/// baseline and expressed in percent (10.0 means 10%).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionConfig {
    pub min_cycle_s: f64,
    pub max_cycle_s: f64,
    pub seat_unload_pct: f64,
    pub mat_load_pct: f64,
    pub hold_window_s: f64,
    pub double_gap_s: f64,
    pub armrest_lean_pct: f64,
    pub occupancy_on_pct: f64,
    pub occupancy_off_pct: f64,
    pub activation_floor_pct: f64,
    pub smoothing_window: usize,
    pub calibration_s: f64,
    pub lift: LiftConfig,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            min_cycle_s: 1.5,
            max_cycle_s: 20.0,
            seat_unload_pct: 10.0,
            mat_load_pct: 70.0,
            hold_window_s: 1.0,
            double_gap_s: 10.0,
            armrest_lean_pct: 15.0,
            occupancy_on_pct: 30.0,
            occupancy_off_pct: 15.0,
            activation_floor_pct: 5.0,
            smoothing_window: crate::pressure::DEFAULT_SMOOTHING_WINDOW,
            calibration_s: 3.0,
            lift: LiftConfig::default(),
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: &str| Err(ConfigError(m.to_string()));
        if !(self.min_cycle_s > 0.0 && self.min_cycle_s < self.max_cycle_s) {
            return err("need 0 < min_cycle_s < max_cycle_s");
        }
        if !(0.5..=2.0).contains(&self.hold_window_s) {
            return err("hold_window_s must lie in [0.5, 2.0]");
        }
        for (name, v) in [
            ("seat_unload_pct", self.seat_unload_pct),
            ("mat_load_pct", self.mat_load_pct),
            ("armrest_lean_pct", self.armrest_lean_pct),
            ("occupancy_on_pct", self.occupancy_on_pct),
            ("occupancy_off_pct", self.occupancy_off_pct),
            ("activation_floor_pct", self.activation_floor_pct),
        ] {
            if !(v > 0.0 && v < 100.0) {
                return Err(ConfigError(format!("{name} must lie in (0, 100)")));
            }
        }
        if self.occupancy_on_pct <= self.occupancy_off_pct {
            return err("occupancy_on_pct must exceed occupancy_off_pct");
        }
        if self.occupancy_off_pct <= self.seat_unload_pct {
            return err("occupancy_off_pct must exceed seat_unload_pct");
        }
        if self.double_gap_s <= 0.0 {
            return err("double_gap_s must be positive");
        }
        if self.smoothing_window == 0 {
            return err("smoothing_window must be positive");
        }
        if self.calibration_s <= 0.0 {
            return err("calibration_s must be positive");
        }
        self.lift.validate()
    }

    pub fn max_cycle_ms(&self) -> u64 {
        (self.max_cycle_s * 1000.0).round() as u64
    }

    pub fn hold_ms(&self) -> u64 {
        (self.hold_window_s * 1000.0).round() as u64
    }

    pub fn double_gap_ms(&self) -> u64 {
        (self.double_gap_s * 1000.0).round() as u64
    }

    pub fn duration_ok(&self, duration_ms: u64) -> bool {
        let d = duration_ms as f64 / 1000.0;
        d >= self.min_cycle_s && d <= self.max_cycle_s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        DetectionConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_bounds() {
        let c = DetectionConfig { min_cycle_s: 25.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = DetectionConfig { hold_window_s: 0.2, ..Default::default() };
        assert!(c.validate().is_err());
        let c = DetectionConfig { mat_load_pct: 100.0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn edge_table() {
        use Stage::*;
        let legal = [
            (S0Seated, S1Rising),
            (S1Rising, S2Standing),
            (S2Standing, S3Lowering),
            (S3Lowering, S4CycleComplete),
            (S4CycleComplete, S0Seated),
            (S1Rising, S0Seated),
            (S3Lowering, S2Standing),
        ];
        for a in Stage::ALL {
            for b in Stage::ALL {
                assert_eq!(Stage::is_legal_edge(a, b), legal.contains(&(a, b)), "{a:?}->{b:?}");
            }
        }
    }

    #[test]
    fn leaning_union() {
        assert_eq!(BalanceLeaning::Left.union(BalanceLeaning::Right), BalanceLeaning::Both);
        assert_eq!(BalanceLeaning::None.union(BalanceLeaning::None), BalanceLeaning::None);
    }
}
