//! Can Band lift-hold-return phase tracking.
//!
//! Vertical linear acceleration is `accel_z - gravity`. Displacement is the
//! trapezoidal double integral of it from the moment the lift starts, with
//! velocity reset to zero once the object is held still.

use super::ConfigError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LiftConfig {
    pub grip_threshold_n: f64,
    /// Upward linear acceleration that starts a lift, m/s².
    pub up_accel: f64,
    /// Downward linear acceleration that starts the return, m/s².
    pub down_accel: f64,
    /// |linear accel| below this counts as at rest, m/s².
    pub rest_band: f64,
    /// How long the object must be at rest before the hold is recognised.
    pub hold_detect_s: f64,
    pub gravity: f64,
}

impl Default for LiftConfig {
    fn default() -> Self {
        Self {
            grip_threshold_n: 5.0,
            up_accel: 0.25,
            down_accel: 0.25,
            rest_band: 0.15,
            hold_detect_s: 0.3,
            gravity: 9.81,
        }
    }
}

impl LiftConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("grip_threshold_n", self.grip_threshold_n),
            ("up_accel", self.up_accel),
            ("down_accel", self.down_accel),
            ("rest_band", self.rest_band),
            ("hold_detect_s", self.hold_detect_s),
            ("gravity", self.gravity),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(ConfigError(format!("lift.{name} must be positive")));
            }
        }
        if self.rest_band >= self.up_accel.min(self.down_accel) {
            return Err(ConfigError("lift.rest_band must be below the motion thresholds".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LiftPhase {
    Idle,
    Lift,
    Hold,
    Return,
}

impl LiftPhase {
    pub fn is_legal_edge(from: LiftPhase, to: LiftPhase) -> bool {
        use LiftPhase::*;
        matches!((from, to), (Idle, Lift) | (Lift, Hold) | (Hold, Return) | (Return, Idle) | (Lift, Idle) | (Hold, Idle))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftSample {
    pub t_ms: u64,
    pub grip_n: f64,
    pub accel_z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftRecord {
    pub start_ms: u64,
    pub end_ms: u64,
    pub distance_m: f64,
    pub grip_avg_n: f64,
    pub grip_peak_n: f64,
}

impl LiftRecord {
    pub fn duration_s(&self) -> f64 {
        (self.end_ms - self.start_ms) as f64 / 1000.0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LiftStep {
    pub transitions: Vec<(LiftPhase, LiftPhase)>,
    pub record: Option<LiftRecord>,
}

#[derive(Debug, Clone)]
pub struct LiftDetector {
    config: LiftConfig,
    phase: LiftPhase,
    started_ms: u64,
    prev: Option<(u64, f64)>,
    velocity: f64,
    position: f64,
    rest_since: Option<(u64, f64)>,
    lifted_to: f64,
    grip_sum: f64,
    grip_n: u32,
    grip_peak: f64,
}

impl LiftDetector {
    pub fn new(config: LiftConfig) -> Self {
        Self {
            config,
            phase: LiftPhase::Idle,
            started_ms: 0,
            prev: None,
            velocity: 0.0,
            position: 0.0,
            rest_since: None,
            lifted_to: 0.0,
            grip_sum: 0.0,
            grip_n: 0,
            grip_peak: 0.0,
        }
    }

    pub fn phase(&self) -> LiftPhase {
        self.phase
    }

    /// Current displacement estimate, metres.
    pub fn position(&self) -> f64 {
        self.position
    }

    fn go(&mut self, to: LiftPhase, out: &mut LiftStep) {
        debug_assert!(LiftPhase::is_legal_edge(self.phase, to));
        out.transitions.push((self.phase, to));
        self.phase = to;
    }

    fn integrate(&mut self, t_ms: u64, a: f64) {
        if let Some((t0, a0)) = self.prev {
            let dt = (t_ms.saturating_sub(t0)) as f64 / 1000.0;
            let v0 = self.velocity;
            self.velocity += 0.5 * (a0 + a) * dt;
            self.position += 0.5 * (v0 + self.velocity) * dt;
        }
        self.prev = Some((t_ms, a));
    }

    fn track_grip(&mut self, grip: f64) {
        self.grip_sum += grip;
        self.grip_n += 1;
        self.grip_peak = self.grip_peak.max(grip);
    }

    pub fn step(&mut self, s: &LiftSample) -> LiftStep {
        let cfg = self.config.clone();
        let mut out = LiftStep::default();
        let a = s.accel_z - cfg.gravity;
        let gripped = s.grip_n > cfg.grip_threshold_n;
        let hold_ms = (cfg.hold_detect_s * 1000.0).round() as u64;

        match self.phase {
            LiftPhase::Idle => {
                if gripped && a > cfg.up_accel {
                    self.started_ms = s.t_ms;
                    self.velocity = 0.0;
                    self.position = 0.0;
                    self.prev = None;
                    self.rest_since = None;
                    self.grip_sum = 0.0;
                    self.grip_n = 0;
                    self.grip_peak = 0.0;
                    self.integrate(s.t_ms, a);
                    self.track_grip(s.grip_n);
                    self.go(LiftPhase::Lift, &mut out);
                }
            }
            LiftPhase::Lift => {
                if !gripped {
                    self.go(LiftPhase::Idle, &mut out);
                    return out;
                }
                self.integrate(s.t_ms, a);
                self.track_grip(s.grip_n);
                if a.abs() < cfg.rest_band {
                    let (since, at) = *self.rest_since.get_or_insert((s.t_ms, self.position));
                    if s.t_ms - since >= hold_ms {
                        // zero-velocity update: the object is held still
                        self.velocity = 0.0;
                        self.lifted_to = at;
                        self.position = at;
                        self.go(LiftPhase::Hold, &mut out);
                    }
                } else {
                    self.rest_since = None;
                }
            }
            LiftPhase::Hold => {
                if !gripped {
                    self.go(LiftPhase::Idle, &mut out);
                    return out;
                }
                self.track_grip(s.grip_n);
                if a < -cfg.down_accel {
                    self.prev = Some((s.t_ms, a));
                    self.velocity = 0.0;
                    self.go(LiftPhase::Return, &mut out);
                } else {
                    self.prev = Some((s.t_ms, 0.0));
                    self.velocity = 0.0;
                }
            }
            LiftPhase::Return => {
                if !gripped {
                    let record = LiftRecord {
                        start_ms: self.started_ms,
                        end_ms: s.t_ms,
                        distance_m: self.lifted_to.abs(),
                        grip_avg_n: if self.grip_n > 0 { self.grip_sum / self.grip_n as f64 } else { 0.0 },
                        grip_peak_n: self.grip_peak,
                    };
                    self.go(LiftPhase::Idle, &mut out);
                    out.record = Some(record);
                } else {
                    self.integrate(s.t_ms, a);
                    self.track_grip(s.grip_n);
                }
            }
        }
        out
    }
}
