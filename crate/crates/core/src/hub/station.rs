//! Per-station and per-band detection pipelines.

use crate::detect::{
    Conditioner, CycleRecord, DetectionConfig, LiftDetector, LiftPhase, LiftRecord, LiftSample, Paired, PairingClassifier, Stage,
    StationSample, StsDetector,
};
use crate::pressure::split_feet;
use crate::wire::{CanBandPayload, PeripheralKind, PressureFramePayload};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Calibration {
    Collecting { from_ms: u64, sum: f64, n: u32 },
    Ready { baseline: f64 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StationOutput {
    pub transitions: Vec<(Stage, Stage)>,
    pub paired: Vec<Paired<CycleRecord>>,
    /// Baseline, when this sample completed calibration.
    pub calibrated: Option<f64>,
}

/// One chair: seat cushion, armrests and floor mat sharing an instance number.
#[derive(Debug, Clone)]
pub struct StationPipeline {
    instance: u8,
    config: DetectionConfig,
    min_baseline: f64,
    calibration: Calibration,
    conditioner: Conditioner,
    detector: StsDetector,
    pairing: PairingClassifier<CycleRecord>,
    mat: f64,
    feet: (f64, f64),
    arms: (f64, f64),
    last_t: Option<u64>,
    seen: BTreeSet<PeripheralKind>,
    trace: Option<(Vec<StationSample>, Vec<CycleRecord>)>,
}

impl StationPipeline {
    pub fn new(instance: u8, config: DetectionConfig, min_baseline: f64) -> Self {
        Self {
            instance,
            conditioner: Conditioner::new(&config),
            detector: StsDetector::new(config.clone()),
            pairing: PairingClassifier::new(&config),
            config,
            min_baseline,
            calibration: Calibration::Collecting { from_ms: 0, sum: 0.0, n: 0 },
            mat: 0.0,
            feet: (0.0, 0.0),
            arms: (0.0, 0.0),
            last_t: None,
            seen: BTreeSet::new(),
            trace: None,
        }
    }

    pub fn instance(&self) -> u8 {
        self.instance
    }

    pub fn record_trace(&mut self) {
        self.trace.get_or_insert_with(Default::default);
    }

    /// Samples fed to the detector and the cycle records it produced.
    pub fn trace(&self) -> Option<(&[StationSample], &[CycleRecord])> {
        self.trace.as_ref().map(|(s, r)| (s.as_slice(), r.as_slice()))
    }

    pub fn baseline(&self) -> Option<f64> {
        match self.calibration {
            Calibration::Ready { baseline } => Some(baseline),
            Calibration::Collecting { .. } => None,
        }
    }

    pub fn stage(&self) -> Stage {
        self.detector.state().stage
    }

    pub fn last_sample_ms(&self) -> Option<u64> {
        self.last_t
    }

    /// `+`-joined ids of the peripherals seen at this station.
    pub fn signature(&self) -> String {
        self.seen.iter().map(|k| format!("{}:{}", k.label(), self.instance)).collect::<Vec<_>>().join("+")
    }

    pub fn recalibrate(&mut self) {
        self.calibration = Calibration::Collecting { from_ms: 0, sum: 0.0, n: 0 };
        self.conditioner = Conditioner::new(&self.config);
        self.detector = StsDetector::new(self.config.clone());
    }

    pub fn on_mat(&mut self, frame: &PressureFramePayload) {
        self.seen.insert(PeripheralKind::FloorMat);
        self.mat = frame.total();
        let split = split_feet(frame, 0.0);
        self.feet = (split.left_load(), split.right_load());
    }

    pub fn on_armrest(&mut self, kind: PeripheralKind, frame: &PressureFramePayload) {
        self.seen.insert(kind);
        match kind {
            PeripheralKind::ArmrestLeft => self.arms.0 = frame.total(),
            _ => self.arms.1 = frame.total(),
        }
    }

    pub fn on_cushion(&mut self, t_ms: u64, frame: &PressureFramePayload) -> StationOutput {
        self.seen.insert(PeripheralKind::SeatCushion);
        let mut out = StationOutput::default();
        if self.last_t.is_some_and(|t| t_ms <= t) {
            return out;
        }
        self.last_t = Some(t_ms);
        let load = frame.total();
        let baseline = match &mut self.calibration {
            Calibration::Collecting { from_ms, sum, n } => {
                if *n == 0 {
                    *from_ms = t_ms;
                }
                *sum += load;
                *n += 1;
                if t_ms - *from_ms >= (self.config.calibration_s * 1000.0).round() as u64 {
                    let baseline = *sum / *n as f64;
                    if baseline >= self.min_baseline {
                        self.calibration = Calibration::Ready { baseline };
                        out.calibrated = Some(baseline);
                    } else {
                        *n = 0;
                        *sum = 0.0;
                    }
                }
                return out;
            }
            Calibration::Ready { baseline } => *baseline,
        };

        if self.stage() == Stage::S0Seated {
            out.paired.extend(self.pairing.poll(t_ms));
        }
        let sample = StationSample {
            t_ms,
            seat: load / baseline,
            mat: self.mat / baseline,
            arm_left: self.arms.0 / baseline,
            arm_right: self.arms.1 / baseline,
            feet_left: self.feet.0 / baseline,
            feet_right: self.feet.1 / baseline,
        };
        let step = self.detector.step(&self.conditioner.push(&sample));
        out.transitions = step.transitions;
        if let Some((samples, records)) = &mut self.trace {
            samples.push(sample);
            records.extend(step.record);
        }
        if let Some(record) = step.record {
            out.paired.extend(self.pairing.push(record));
        }
        out
    }

    /// Releases a pending single once the station clock (estimated) passes
    /// the gap. Held back while a cycle is in progress, since that cycle may
    /// still pair with it.
    pub fn poll(&mut self, device_now_ms: u64) -> Option<Paired<CycleRecord>> {
        if self.last_t.is_some_and(|t| device_now_ms < t) || self.stage() != Stage::S0Seated {
            return None;
        }
        self.pairing.poll(device_now_ms)
    }

    pub fn flush(&mut self) -> Option<Paired<CycleRecord>> {
        self.pairing.flush()
    }
}

#[derive(Debug, Clone)]
pub struct BandPipeline {
    instance: u8,
    detector: LiftDetector,
    pairing: PairingClassifier<LiftRecord>,
    last_t: Option<u64>,
    trace: Option<(Vec<LiftSample>, Vec<LiftRecord>)>,
}

impl BandPipeline {
    pub fn new(instance: u8, config: &DetectionConfig) -> Self {
        Self {
            instance,
            detector: LiftDetector::new(config.lift.clone()),
            pairing: PairingClassifier::new(config),
            last_t: None,
            trace: None,
        }
    }

    pub fn instance(&self) -> u8 {
        self.instance
    }

    pub fn signature(&self) -> String {
        format!("{}:{}", PeripheralKind::CanBand.label(), self.instance)
    }

    pub fn record_trace(&mut self) {
        self.trace.get_or_insert_with(Default::default);
    }

    pub fn trace(&self) -> Option<(&[LiftSample], &[LiftRecord])> {
        self.trace.as_ref().map(|(s, r)| (s.as_slice(), r.as_slice()))
    }

    pub fn on_sample(&mut self, t_ms: u64, payload: &CanBandPayload) -> Vec<Paired<LiftRecord>> {
        let mut out = Vec::new();
        if self.last_t.is_some_and(|t| t_ms <= t) {
            return out;
        }
        self.last_t = Some(t_ms);
        if self.detector.phase() == LiftPhase::Idle {
            out.extend(self.pairing.poll(t_ms));
        }
        let sample = LiftSample { t_ms, grip_n: payload.grip as f64, accel_z: payload.accel[2] as f64 };
        let step = self.detector.step(&sample);
        if let Some((samples, records)) = &mut self.trace {
            samples.push(sample);
            records.extend(step.record);
        }
        if let Some(record) = step.record {
            out.extend(self.pairing.push(record));
        }
        out
    }

    pub fn poll(&mut self, device_now_ms: u64) -> Option<Paired<LiftRecord>> {
        if self.last_t.is_some_and(|t| device_now_ms < t) || self.detector.phase() != LiftPhase::Idle {
            return None;
        }
        self.pairing.poll(device_now_ms)
    }

    pub fn flush(&mut self) -> Option<Paired<LiftRecord>> {
        self.pairing.flush()
    }
}
