//! Can Band firmware model: LED phase cues and light-triggered sleep.

use crate::detect::{LiftConfig, LiftDetector, LiftPhase, LiftSample};
use crate::wire::LedState;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FirmwareConfig {
    /// Below this ambient light level the band counts as in the dark, lux.
    pub sleep_lux: f64,
    pub sleep_delay_s: f64,
    /// How long the completion pattern stays on after a finished lift.
    pub complete_ms: u64,
    pub lift: LiftConfig,
}

impl Default for FirmwareConfig {
    fn default() -> Self {
        Self { sleep_lux: 5.0, sleep_delay_s: 10.0, complete_ms: 1000, lift: LiftConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirmwareInput {
    pub grip_n: f64,
    pub accel_z: f64,
    pub lux: f64,
}

#[derive(Debug, Clone)]
pub struct CanBandFirmware {
    config: FirmwareConfig,
    detector: LiftDetector,
    dark_since: Option<u64>,
    asleep: bool,
    complete_until: u64,
}

impl CanBandFirmware {
    pub fn new(config: FirmwareConfig) -> Self {
        let detector = LiftDetector::new(config.lift.clone());
        Self { config, detector, dark_since: None, asleep: false, complete_until: 0 }
    }

    pub fn asleep(&self) -> bool {
        self.asleep
    }

    /// Advances the firmware by one sample. Returns the LED pattern and
    /// whether the band is asleep (and therefore not transmitting).
    pub fn step(&mut self, input: FirmwareInput, now_ms: u64) -> (LedState, bool) {
        if input.lux < self.config.sleep_lux {
            let since = *self.dark_since.get_or_insert(now_ms);
            if now_ms - since >= (self.config.sleep_delay_s * 1000.0).round() as u64 {
                if !self.asleep {
                    self.detector = LiftDetector::new(self.config.lift.clone());
                }
                self.asleep = true;
            }
        } else {
            self.dark_since = None;
            self.asleep = false;
        }
        if self.asleep {
            return (LedState::Off, true);
        }

        let step = self.detector.step(&LiftSample { t_ms: now_ms, grip_n: input.grip_n, accel_z: input.accel_z });
        if step.record.is_some() {
            self.complete_until = now_ms + self.config.complete_ms;
        }
        let led = match self.detector.phase() {
            LiftPhase::Idle if now_ms < self.complete_until => LedState::Complete,
            LiftPhase::Idle => LedState::Idle,
            LiftPhase::Lift => LedState::Lift,
            LiftPhase::Hold => LedState::Hold,
            LiftPhase::Return => LedState::Return,
        };
        (led, false)
    }
}

pub fn can_band_firmware_step(state: &mut CanBandFirmware, input: FirmwareInput, now_ms: u64) -> (LedState, bool) {
    state.step(input, now_ms)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BRIGHT: FirmwareInput = FirmwareInput { grip_n: 0.0, accel_z: 9.81, lux: 300.0 };
    const DARK: FirmwareInput = FirmwareInput { grip_n: 0.0, accel_z: 9.81, lux: 0.0 };

    #[test]
    fn sleeps_after_ten_dark_seconds_and_wakes() {
        let mut fw = CanBandFirmware::new(FirmwareConfig::default());
        for t in (0..10_000).step_by(50) {
            assert_eq!(fw.step(DARK, t), (LedState::Idle, false));
        }
        assert_eq!(fw.step(DARK, 10_000), (LedState::Off, true));
        assert_eq!(fw.step(BRIGHT, 10_050), (LedState::Idle, false));
    }

    #[test]
    fn upward_grip_lights_lift() {
        let mut fw = CanBandFirmware::new(FirmwareConfig::default());
        fw.step(BRIGHT, 0);
        let (led, sleep) = fw.step(FirmwareInput { grip_n: 20.0, accel_z: 9.81 + 2.0, lux: 300.0 }, 50);
        assert_eq!((led, sleep), (LedState::Lift, false));
    }
}
