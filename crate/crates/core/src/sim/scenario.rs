//! Scenario scripts.
//!
//! One step per line, `action duration [params]`, `#` starts a comment.
//!
//! ```text
//! @body_weight 700          # total pressure units of the seated user
//! @rate 20                  # samples per second
//! @start_at 2026-03-02T09:00:00
//! @posture seated           # seated | standing | vacant
//! @noise 0.02               # per-cell Gaussian sigma, relative to the cell load
//! @peripherals seat armrest-left armrest-right mat canband
//!
//! sit 5                     # seated idle
//! lean 0 left 0.3           # armrest load for the next rise and lower
//! rise 2
//! stand 3
//! shift 4 0.3               # weight shift (seated) or sway (standing), amplitude
//! lower 2
//! lift 1.0 0.4              # hold 1 s at 0.4 m; grasp, lift, return, release add 3 s
//! cupboard 30               # Can Band in the dark
//! wait 10
//! vacant 60                 # nobody on the chair
//! !pause                    # session command at this point of the timeline
//! ```
//!
//! Commands are `!pause`, `!resume`, `!mask_on`, `!mask_off`, `!accept [goal]`,
//! `!decline` and `!recalibrate`.

use crate::hub::Command;
use crate::wire::PeripheralKind;
use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Grasp, lift, return and release phases around the hold of a lift, in seconds.
pub const LIFT_GRASP_S: f64 = 0.5;
pub const LIFT_MOVE_S: f64 = 1.0;
pub const LIFT_RELEASE_S: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("scenario has no steps")]
    Empty,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("step {index}: {message}")]
    Invalid { index: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Posture {
    Seated,
    Standing,
    Vacant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Action {
    SitIdle,
    Rise,
    StandIdle,
    Lower,
    ShiftWeight { amplitude: f64 },
    LeanOnArmrest { side: Side, fraction: f64 },
    LiftObject { height_m: f64, hold_s: f64 },
    PlaceInCupboard,
    Wait,
    Vacant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStep {
    pub action: Action,
    pub duration_s: f64,
}

impl ScenarioStep {
    pub fn new(action: Action, duration_s: f64) -> Self {
        Self { action, duration_s }
    }

    /// Time the step occupies on the timeline.
    pub fn span_s(&self) -> f64 {
        match self.action {
            Action::LiftObject { hold_s, .. } => LIFT_GRASP_S + 2.0 * LIFT_MOVE_S + hold_s + LIFT_RELEASE_S,
            Action::LeanOnArmrest { .. } => 0.0,
            _ => self.duration_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScript {
    pub steps: Vec<ScenarioStep>,
    pub body_weight_load: f64,
    pub sample_rate_hz: f64,
    pub start_at: NaiveDateTime,
    pub initial_posture: Posture,
    pub noise: f64,
    pub peripherals: Vec<PeripheralKind>,
    /// Session commands at timeline offsets, seconds.
    pub commands: Vec<(f64, Command)>,
}

impl Default for ScenarioScript {
    fn default() -> Self {
        Self {
            steps: Vec::new(),
            body_weight_load: 700.0,
            sample_rate_hz: 20.0,
            start_at: chrono::NaiveDate::from_ymd_opt(2026, 3, 2).unwrap().and_hms_opt(9, 0, 0).unwrap(),
            initial_posture: Posture::Seated,
            noise: 0.02,
            peripherals: PeripheralKind::ALL.to_vec(),
            commands: Vec::new(),
        }
    }
}

impl ScenarioScript {
    pub fn from_steps(steps: Vec<ScenarioStep>) -> Self {
        Self { steps, ..Self::default() }
    }

    pub fn total_s(&self) -> f64 {
        self.steps.iter().map(ScenarioStep::span_s).sum()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.steps.is_empty() {
            return Err(ScenarioError::Empty);
        }
        let bad = |index: usize, message: &str| Err(ScenarioError::Invalid { index, message: message.into() });
        if !(self.body_weight_load > 0.0 && self.body_weight_load.is_finite()) {
            return bad(0, "body weight load must be positive");
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz <= 1000.0) {
            return bad(0, "sample rate must be in (0, 1000] Hz");
        }
        if !(0.0..=0.5).contains(&self.noise) {
            return bad(0, "noise must be in [0, 0.5]");
        }
        let mut posture = self.initial_posture;
        for (i, step) in self.steps.iter().enumerate() {
            if !(step.duration_s >= 0.0 && step.duration_s.is_finite()) {
                return bad(i, "duration must be non-negative");
            }
            match step.action {
                Action::Rise | Action::Lower if step.duration_s <= 0.0 => return bad(i, "ramp duration must be positive"),
                Action::Rise if posture != Posture::Seated => return bad(i, "rise needs a seated posture"),
                Action::Lower if posture != Posture::Standing => return bad(i, "lower needs a standing posture"),
                Action::SitIdle if posture != Posture::Seated => return bad(i, "sit needs a seated posture"),
                Action::StandIdle if posture != Posture::Standing => return bad(i, "stand needs a standing posture"),
                Action::ShiftWeight { amplitude } if !(0.0..=1.0).contains(&amplitude) => {
                    return bad(i, "shift amplitude must be in [0, 1]")
                }
                Action::LeanOnArmrest { fraction, .. } if !(0.0..=1.0).contains(&fraction) => {
                    return bad(i, "lean fraction must be in [0, 1]")
                }
                Action::LiftObject { height_m, hold_s } if !(height_m > 0.0 && height_m <= 3.0 && hold_s >= 0.0) => {
                    return bad(i, "lift needs a height in (0, 3] m and a non-negative hold")
                }
                _ => {}
            }
            posture = match step.action {
                Action::Rise => Posture::Standing,
                Action::Lower => Posture::Seated,
                Action::Vacant => Posture::Vacant,
                _ => posture,
            };
        }
        let total = self.total_s();
        if self.commands.iter().any(|(t, _)| !(*t >= 0.0 && *t <= total)) {
            return bad(0, "command offsets must lie within the scenario");
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut script = ScenarioScript::default();
        let mut clock = 0.0;
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ScenarioError::Parse { line: line_no, message };
            let mut words = line.split_whitespace();
            let head = words.next().unwrap_or_default();
            let args: Vec<&str> = words.collect();
            let num = |i: usize, what: &str| -> Result<f64, ScenarioError> {
                let s = args.get(i).ok_or_else(|| err(format!("missing {what}")))?;
                s.parse::<f64>().map_err(|_| err(format!("bad {what} `{s}`")))
            };

            if let Some(directive) = head.strip_prefix('@') {
                match directive {
                    "body_weight" => script.body_weight_load = num(0, "body weight")?,
                    "rate" => script.sample_rate_hz = num(0, "rate")?,
                    "noise" => script.noise = num(0, "noise")?,
                    "start_at" => {
                        let s = args.first().ok_or_else(|| err("missing time".into()))?;
                        script.start_at = s.parse().map_err(|_| err(format!("bad time `{s}`")))?;
                    }
                    "posture" => {
                        script.initial_posture = match args.first().copied() {
                            Some("seated") => Posture::Seated,
                            Some("standing") => Posture::Standing,
                            Some("vacant") => Posture::Vacant,
                            other => return Err(err(format!("bad posture {other:?}"))),
                        }
                    }
                    "peripherals" => {
                        script.peripherals = args
                            .iter()
                            .map(|a| PeripheralKind::from_label(a).ok_or_else(|| err(format!("unknown peripheral `{a}`"))))
                            .collect::<Result<_, _>>()?;
                    }
                    other => return Err(err(format!("unknown directive `@{other}`"))),
                }
                continue;
            }

            if let Some(cmd) = head.strip_prefix('!') {
                let command = match cmd {
                    "pause" => Command::Pause,
                    "resume" => Command::Resume,
                    "mask_on" => Command::MaskOn,
                    "mask_off" => Command::MaskOff,
                    "decline" => Command::DeclineGoal,
                    "recalibrate" => Command::Recalibrate,
                    "accept" => Command::AcceptGoal {
                        value: match args.first() {
                            Some(v) => Some(v.parse().map_err(|_| err(format!("bad goal `{v}`")))?),
                            None => None,
                        },
                    },
                    other => return Err(err(format!("unknown command `!{other}`"))),
                };
                script.commands.push((clock, command));
                continue;
            }

            let duration = num(0, "duration")?;
            let action = match head {
                "sit" => Action::SitIdle,
                "rise" => Action::Rise,
                "stand" => Action::StandIdle,
                "lower" => Action::Lower,
                "wait" => Action::Wait,
                "cupboard" => Action::PlaceInCupboard,
                "vacant" => Action::Vacant,
                "shift" => Action::ShiftWeight { amplitude: num(1, "amplitude")? },
                "lean" => {
                    let side = match args.get(1).copied() {
                        Some("left") => Side::Left,
                        Some("right") => Side::Right,
                        Some("both") => Side::Both,
                        other => return Err(err(format!("bad side {other:?}"))),
                    };
                    Action::LeanOnArmrest { side, fraction: num(2, "fraction")? }
                }
                "lift" => Action::LiftObject { hold_s: duration, height_m: num(1, "height")? },
                other => return Err(err(format!("unknown action `{other}`"))),
            };
            let step = ScenarioStep::new(action, duration);
            clock += step.span_s();
            script.steps.push(step);
        }
        script.validate()?;
        Ok(script)
    }
}

impl FromStr for ScenarioScript {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Both => "both",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_clean_cycle() {
        let s = ScenarioScript::parse("# clean\nsit 5\nrise 2\nstand 3 # up\nlower 2\nsit 5\n").unwrap();
        assert_eq!(s.steps.len(), 5);
        assert_eq!(s.total_s(), 17.0);
        assert_eq!(s.steps[1], ScenarioStep::new(Action::Rise, 2.0));
    }

    #[test]
    fn directives_and_commands() {
        let s = ScenarioScript::parse(
            "@body_weight 650\n@rate 25\n@start_at 2026-04-01T18:30:00\nsit 2\n!pause\nlift 1 0.4\n!accept 5\nwait 1\n",
        )
        .unwrap();
        assert_eq!(s.body_weight_load, 650.0);
        assert_eq!(s.sample_rate_hz, 25.0);
        assert_eq!(s.commands, vec![(2.0, Command::Pause), (6.0, Command::AcceptGoal { value: Some(5) })]);
        assert_eq!(s.steps[1].action, Action::LiftObject { height_m: 0.4, hold_s: 1.0 });
    }

    #[test]
    fn errors() {
        assert_eq!(ScenarioScript::parse("# nothing\n"), Err(ScenarioError::Empty));
        assert!(matches!(ScenarioScript::parse("jump 2"), Err(ScenarioError::Parse { line: 1, .. })));
        assert!(matches!(ScenarioScript::parse("sit 2\nlower 2"), Err(ScenarioError::Invalid { index: 1, .. })));
        assert!(matches!(ScenarioScript::parse("rise 0"), Err(ScenarioError::Invalid { .. })));
        assert!(matches!(ScenarioScript::parse("lean 0 left 1.5\nrise 1"), Err(ScenarioError::Invalid { .. })));
    }
}
