use super::firmware::{CanBandFirmware, FirmwareConfig, FirmwareInput};
use super::scenario::{Action, Posture, ScenarioError, ScenarioScript, Side, LIFT_GRASP_S, LIFT_MOVE_S};
use crate::detect::{classify_pairing, BalanceLeaning, DetectionConfig, Paired, TimedRecord};
use crate::hub::Command;
use crate::wire::{CanBandPayload, Payload, PeripheralId, PeripheralKind, PeripheralPacket, PressureFramePayload};
use chrono::NaiveDateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

pub const GRAVITY: f64 = 9.81;
pub const SEAT_GRID: (u8, u8) = (8, 8);
pub const ARMREST_GRID: (u8, u8) = (2, 8);
pub const MAT_GRID: (u8, u8) = (12, 24);
const LEFT_FOOT_COLS: std::ops::Range<usize> = 4..8;
const RIGHT_FOOT_COLS: std::ops::Range<usize> = 16..20;
const FOOT_ROWS: std::ops::Range<usize> = 3..9;
const GRIP_N: f64 = 20.0;
const BRIGHT_LUX: f64 = 300.0;
const HEARTBEAT_MS: u64 = 1000;
const MAX_BOOT_OFFSET_MS: u64 = 5000;

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Nominal chair loads as fractions of body weight.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ChairState {
    pub seat: f64,
    pub mat: f64,
    pub arm_left: f64,
    pub arm_right: f64,
    /// Share of the mat load on the left foot.
    pub left_share: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandState {
    pub grip_n: f64,
    pub accel_z: f64,
    pub lux: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ChairMotion {
    Seated,
    Standing,
    Vacant,
    Rise,
    Lower,
    Shift(f64),
    Sway(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BandMotion {
    Idle,
    Lift { height: f64, hold_s: f64 },
    Dark,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    start_ms: u64,
    end_ms: u64,
    chair: ChairMotion,
    band: BandMotion,
    lean: Option<(Side, f64)>,
}

/// Continuous-time trajectory compiled from a script.
#[derive(Debug, Clone)]
pub struct Timeline {
    segments: Vec<Segment>,
    end_ms: u64,
    final_chair: ChairMotion,
}

impl Timeline {
    pub fn compile(script: &ScenarioScript) -> Self {
        let mut segments = Vec::new();
        let mut posture = script.initial_posture;
        let mut lean = None;
        let mut clock = 0.0;
        let idle = |p: Posture| match p {
            Posture::Seated => ChairMotion::Seated,
            Posture::Standing => ChairMotion::Standing,
            Posture::Vacant => ChairMotion::Vacant,
        };
        for step in &script.steps {
            let start_ms = (clock * 1000.0_f64).round() as u64;
            clock += step.span_s();
            let end_ms = (clock * 1000.0_f64).round() as u64;
            let mut band = BandMotion::Idle;
            let mut seg_lean = None;
            let chair = match step.action {
                Action::LeanOnArmrest { side, fraction } => {
                    lean = Some((side, fraction));
                    continue;
                }
                Action::Rise => {
                    seg_lean = lean;
                    posture = Posture::Standing;
                    ChairMotion::Rise
                }
                Action::Lower => {
                    seg_lean = lean.take();
                    posture = Posture::Seated;
                    ChairMotion::Lower
                }
                Action::Vacant => {
                    posture = Posture::Vacant;
                    ChairMotion::Vacant
                }
                Action::ShiftWeight { amplitude } => match posture {
                    Posture::Seated => ChairMotion::Shift(amplitude),
                    Posture::Standing => ChairMotion::Sway(amplitude),
                    Posture::Vacant => ChairMotion::Vacant,
                },
                Action::LiftObject { height_m, hold_s } => {
                    band = BandMotion::Lift { height: height_m, hold_s };
                    idle(posture)
                }
                Action::PlaceInCupboard => {
                    band = BandMotion::Dark;
                    idle(posture)
                }
                Action::SitIdle | Action::StandIdle | Action::Wait => idle(posture),
            };
            if end_ms > start_ms {
                segments.push(Segment { start_ms, end_ms, chair, band, lean: seg_lean });
            }
        }
        let end_ms = segments.last().map_or(0, |s| s.end_ms);
        Self { segments, end_ms, final_chair: idle(posture) }
    }

    pub fn end_ms(&self) -> u64 {
        self.end_ms
    }

    fn segment_at(&self, t_ms: f64) -> Option<&Segment> {
        let i = self.segments.partition_point(|s| (s.end_ms as f64) <= t_ms);
        self.segments.get(i)
    }

    pub fn chair_at(&self, t_ms: f64) -> ChairState {
        let Some(seg) = self.segment_at(t_ms) else {
            return chair_idle(self.final_chair);
        };
        let rel_s = (t_ms - seg.start_ms as f64) / 1000.0;
        let tau = (t_ms - seg.start_ms as f64) / (seg.end_ms - seg.start_ms) as f64;
        let ramp = |p: f64| {
            let (l, r) = match seg.lean {
                Some((side, f)) => {
                    let a = f * (PI * tau.clamp(0.0, 1.0)).sin();
                    match side {
                        Side::Left => (a, 0.0),
                        Side::Right => (0.0, a),
                        Side::Both => (a, a),
                    }
                }
                None => (0.0, 0.0),
            };
            let scale = (0.9 / (l + r)).min(1.0);
            let (l, r) = if l + r > 0.0 { (l * scale, r * scale) } else { (0.0, 0.0) };
            let body = 1.0 - l - r;
            ChairState { seat: (1.0 - p) * body, mat: p * body, arm_left: l, arm_right: r, left_share: 0.5 }
        };
        match seg.chair {
            ChairMotion::Rise => ramp(smoothstep(tau)),
            ChairMotion::Lower => ramp(1.0 - smoothstep(tau)),
            ChairMotion::Shift(amp) => {
                let x = amp * (1.0 - (2.0 * PI * rel_s).cos()) / 2.0;
                ChairState { seat: 1.0 - x, mat: x, left_share: 0.5, ..Default::default() }
            }
            ChairMotion::Sway(amp) => ChairState {
                mat: 1.0,
                left_share: 0.5 + 0.5 * amp * (PI * rel_s).sin(),
                ..Default::default()
            },
            other => chair_idle(other),
        }
    }

    pub fn band_at(&self, t_ms: f64) -> BandState {
        let rest = BandState { grip_n: 0.0, accel_z: GRAVITY, lux: BRIGHT_LUX };
        let Some(seg) = self.segment_at(t_ms) else {
            return rest;
        };
        let rel = (t_ms - seg.start_ms as f64) / 1000.0;
        match seg.band {
            BandMotion::Idle => rest,
            BandMotion::Dark => BandState { lux: 0.0, ..rest },
            BandMotion::Lift { height, hold_s } => {
                let lift_from = LIFT_GRASP_S;
                let hold_from = lift_from + LIFT_MOVE_S;
                let ret_from = hold_from + hold_s;
                let release_from = ret_from + LIFT_MOVE_S;
                let profile = |tau: f64| height * (6.0 - 12.0 * tau) / (LIFT_MOVE_S * LIFT_MOVE_S);
                let (grip, a) = if rel < lift_from {
                    (GRIP_N, 0.0)
                } else if rel < hold_from {
                    (GRIP_N, profile((rel - lift_from) / LIFT_MOVE_S))
                } else if rel < ret_from {
                    (GRIP_N, 0.0)
                } else if rel < release_from {
                    (GRIP_N, -profile((rel - ret_from) / LIFT_MOVE_S))
                } else {
                    (0.0, 0.0)
                };
                BandState { grip_n: grip, accel_z: GRAVITY + a, lux: BRIGHT_LUX }
            }
        }
    }
}

fn chair_idle(m: ChairMotion) -> ChairState {
    match m {
        ChairMotion::Standing => ChairState { mat: 1.0, left_share: 0.5, ..Default::default() },
        ChairMotion::Vacant => ChairState { left_share: 0.5, ..Default::default() },
        _ => ChairState { seat: 1.0, left_share: 0.5, ..Default::default() },
    }
}

/// Noise-free cell layout of each chair peripheral.
pub fn seat_frame(load: f64) -> PressureFramePayload {
    let (rows, cols) = SEAT_GRID;
    let mut f = PressureFramePayload::zeros(rows, cols);
    let weight = |r: usize| 1.0 + 0.1 * (r as f64 - 1.0);
    let total: f64 = (1..7).map(|r| weight(r) * 6.0).sum();
    for r in 1..7 {
        for c in 1..7 {
            f.cells[r * cols as usize + c] = (load * weight(r) / total) as f32;
        }
    }
    f
}

pub fn armrest_frame(load: f64) -> PressureFramePayload {
    let (rows, cols) = ARMREST_GRID;
    let n = rows as usize * cols as usize;
    PressureFramePayload { rows, cols, cells: vec![(load / n as f64) as f32; n] }
}

pub fn mat_frame(left: f64, right: f64) -> PressureFramePayload {
    let (rows, cols) = MAT_GRID;
    let mut f = PressureFramePayload::zeros(rows, cols);
    let per = (FOOT_ROWS.len() * LEFT_FOOT_COLS.len()) as f64;
    for r in FOOT_ROWS {
        for c in LEFT_FOOT_COLS {
            f.cells[r * cols as usize + c] = (left / per) as f32;
        }
        for c in RIGHT_FOOT_COLS {
            f.cells[r * cols as usize + c] = (right / per) as f32;
        }
    }
    f
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthCycle {
    pub start_ms: u64,
    pub end_ms: u64,
    pub leaning: BalanceLeaning,
    /// Duration within bounds and the mat held above threshold long enough.
    pub valid: bool,
}

impl TimedRecord for TruthCycle {
    fn start_ms(&self) -> u64 {
        self.start_ms
    }
    fn end_ms(&self) -> u64 {
        self.end_ms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthLift {
    pub start_ms: u64,
    pub end_ms: u64,
    pub height_m: f64,
}

impl TimedRecord for TruthLift {
    fn start_ms(&self) -> u64 {
        self.start_ms
    }
    fn end_ms(&self) -> u64 {
        self.end_ms
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Every performed rise-to-sit sequence, valid or not.
    pub cycles: Vec<TruthCycle>,
    pub sts: Vec<Paired<TruthCycle>>,
    pub lifts: Vec<TruthLift>,
    pub lift_reps: Vec<Paired<TruthLift>>,
}

fn count<R>(p: &[Paired<R>]) -> (usize, usize) {
    let doubles = p.iter().filter(|x| matches!(x, Paired::Double(..))).count();
    (p.len() - doubles, doubles)
}

impl GroundTruth {
    /// (singles, doubles) of sit-to-stand repetitions.
    pub fn sts_counts(&self) -> (usize, usize) {
        count(&self.sts)
    }

    pub fn lift_counts(&self) -> (usize, usize) {
        count(&self.lift_reps)
    }

    pub fn is_empty(&self) -> bool {
        self.sts.is_empty() && self.lift_reps.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedPacket {
    /// Scenario time of emission.
    pub t_ms: u64,
    pub packet: PeripheralPacket,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub streams: BTreeMap<PeripheralId, Vec<TimedPacket>>,
    pub truth: GroundTruth,
    pub boot_offsets: BTreeMap<PeripheralId, u64>,
    pub duration_ms: u64,
    pub sample_period_ms: u64,
    pub start_at: NaiveDateTime,
    pub commands: Vec<(u64, Command)>,
}

impl Synthesis {
    pub fn packet_count(&self) -> usize {
        self.streams.values().map(Vec::len).sum()
    }
}

pub fn synthesize_streams(script: &ScenarioScript, seed: u64) -> Result<Synthesis, ScenarioError> {
    synthesize_with(script, seed, &DetectionConfig::default(), &FirmwareConfig::default())
}

pub fn synthesize_with(
    script: &ScenarioScript,
    seed: u64,
    criteria: &DetectionConfig,
    firmware: &FirmwareConfig,
) -> Result<Synthesis, ScenarioError> {
    script.validate()?;
    let timeline = Timeline::compile(script);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = script.body_weight_load;

    let mut kinds: Vec<PeripheralKind> = PeripheralKind::ALL.into_iter().filter(|k| script.peripherals.contains(k)).collect();
    kinds.dedup();
    let ids: Vec<PeripheralId> = kinds.iter().map(|&k| PeripheralId::new(k, 0)).collect();
    let boot_offsets: BTreeMap<PeripheralId, u64> =
        ids.iter().map(|&id| (id, rng.random_range(0..MAX_BOOT_OFFSET_MS))).collect();
    let mut streams: BTreeMap<PeripheralId, Vec<TimedPacket>> = ids.iter().map(|&id| (id, Vec::new())).collect();
    let mut seqs: BTreeMap<PeripheralId, u32> = ids.iter().map(|&id| (id, 0)).collect();
    let mut firmware_state = CanBandFirmware::new(firmware.clone());
    let noise = script.noise;

    let period = 1000.0 / script.sample_rate_hz;
    let ticks = (timeline.end_ms() as f64 / period).floor() as u64;
    for k in 0..ticks {
        let t_ms = (k as f64 * period).round() as u64;
        let chair = timeline.chair_at(t_ms as f64);
        let band = timeline.band_at(t_ms as f64);
        for &id in &ids {
            let payload = match id.kind {
                PeripheralKind::SeatCushion => Some(Payload::PressureFrame(seat_frame(chair.seat * w))),
                PeripheralKind::ArmrestLeft => Some(Payload::PressureFrame(armrest_frame(chair.arm_left * w))),
                PeripheralKind::ArmrestRight => Some(Payload::PressureFrame(armrest_frame(chair.arm_right * w))),
                PeripheralKind::FloorMat => {
                    let m = chair.mat * w;
                    Some(Payload::PressureFrame(mat_frame(m * chair.left_share, m * (1.0 - chair.left_share))))
                }
                PeripheralKind::CanBand => {
                    let jitter = |rng: &mut ChaCha8Rng, sigma: f64| {
                        if sigma > 0.0 {
                            Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
                        } else {
                            0.0
                        }
                    };
                    let grip = (band.grip_n + jitter(&mut rng, noise * band.grip_n)).max(0.0);
                    let accel = [jitter(&mut rng, noise), jitter(&mut rng, noise), band.accel_z + jitter(&mut rng, noise)];
                    let (led, asleep) = firmware_state
                        .step(FirmwareInput { grip_n: grip, accel_z: accel[2], lux: band.lux }, t_ms);
                    (!asleep).then(|| {
                        Payload::CanBand(CanBandPayload {
                            grip: grip as f32,
                            accel: accel.map(|a| a as f32),
                            lux: band.lux as f32,
                            led_state: led,
                        })
                    })
                }
            };
            let Some(mut payload) = payload else { continue };
            if let Payload::PressureFrame(frame) = &mut payload {
                add_cell_noise(frame, noise, &mut rng);
            }
            let stream = streams.get_mut(&id).expect("known id");
            let seq = seqs.get_mut(&id).expect("known id");
            let device_time_ms = t_ms + boot_offsets[&id];
            stream.push(TimedPacket { t_ms, packet: PeripheralPacket { id, seq: *seq, device_time_ms, payload } });
            *seq = seq.wrapping_add(1);
            if t_ms % HEARTBEAT_MS == 0 {
                stream.push(TimedPacket {
                    t_ms,
                    packet: PeripheralPacket { id, seq: *seq, device_time_ms, payload: Payload::Heartbeat },
                });
                *seq = seq.wrapping_add(1);
            }
        }
    }

    let truth = ground_truth(&timeline, criteria);
    let commands = script.commands.iter().map(|(t, c)| ((t * 1000.0).round() as u64, c.clone())).collect();
    Ok(Synthesis {
        streams,
        truth,
        boot_offsets,
        duration_ms: timeline.end_ms(),
        sample_period_ms: period.round() as u64,
        start_at: script.start_at,
        commands,
    })
}

fn add_cell_noise(frame: &mut PressureFramePayload, rel: f64, rng: &mut ChaCha8Rng) {
    if rel <= 0.0 {
        return;
    }
    for cell in frame.cells.iter_mut().filter(|c| **c > 0.0) {
        let v = *cell as f64;
        let n: f64 = Normal::new(0.0, rel * v).expect("finite sigma").sample(rng);
        *cell = (v + n).max(0.0) as f32;
    }
}

/// Longest continuous time, ms, with the nominal mat fraction above `level`.
fn longest_mat_run(timeline: &Timeline, from_ms: u64, to_ms: u64, level: f64) -> u64 {
    let (mut best, mut run) = (0, 0);
    for t in from_ms..to_ms {
        if timeline.chair_at(t as f64).mat > level {
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
    }
    best
}

fn ground_truth(timeline: &Timeline, criteria: &DetectionConfig) -> GroundTruth {
    let mut truth = GroundTruth::default();
    let mut rise: Option<(u64, Option<(Side, f64)>)> = None;
    let lean_level = criteria.armrest_lean_pct / 100.0;
    for seg in &timeline.segments {
        match seg.chair {
            ChairMotion::Rise => rise = Some((seg.start_ms, seg.lean)),
            ChairMotion::Lower => {
                if let Some((start_ms, lean)) = rise.take() {
                    let end_ms = seg.end_ms;
                    let hold = longest_mat_run(timeline, start_ms, end_ms, criteria.mat_load_pct / 100.0);
                    let leaning = match lean {
                        Some((side, f)) if f > lean_level => match side {
                            Side::Left => BalanceLeaning::Left,
                            Side::Right => BalanceLeaning::Right,
                            Side::Both => BalanceLeaning::Both,
                        },
                        _ => BalanceLeaning::None,
                    };
                    truth.cycles.push(TruthCycle {
                        start_ms,
                        end_ms,
                        leaning,
                        valid: criteria.duration_ok(end_ms - start_ms) && hold >= criteria.hold_ms(),
                    });
                }
            }
            ChairMotion::Vacant => rise = None,
            _ => {}
        }
        if let BandMotion::Lift { height, hold_s } = seg.band {
            let start_ms = seg.start_ms + (LIFT_GRASP_S * 1000.0).round() as u64;
            let end_ms = start_ms + ((2.0 * LIFT_MOVE_S + hold_s) * 1000.0).round() as u64;
            truth.lifts.push(TruthLift { start_ms, end_ms, height_m: height });
        }
    }
    let valid: Vec<TruthCycle> = truth.cycles.iter().filter(|c| c.valid).copied().collect();
    truth.sts = classify_pairing(&valid, criteria);
    truth.lift_reps = classify_pairing(&truth.lifts, criteria);
    truth
}
