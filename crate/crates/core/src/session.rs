//! End-to-end simulated sessions: script to packets, through faults, into a hub.

use crate::detect::{classify_pairing, offline_segment, LiftDetector, Paired, RepKind, RepType, StationTrace};
use crate::hub::{build_schedule, run_schedule, EventBody, Hub, HubConfig, HubEvent, RunOutcome, ScheduledAction};
use crate::metrics::MetricsStore;
use crate::sim::{apply_faults, synthesize_with, Delivery, FaultProfile, FirmwareConfig, ScenarioError, ScenarioScript, Synthesis};
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub synthesis: Synthesis,
    pub deliveries: Vec<Delivery>,
    pub schedule: Vec<ScheduledAction>,
    /// Session-clock time of the last scheduled action.
    pub end_ms: u64,
}

pub fn prepare(
    script: &ScenarioScript,
    seed: u64,
    faults: &FaultProfile,
    config: &HubConfig,
) -> Result<PreparedRun, ScenarioError> {
    let firmware = FirmwareConfig { lift: config.detection.lift.clone(), ..FirmwareConfig::default() };
    let synthesis = synthesize_with(script, seed, &config.detection, &firmware)?;
    let deliveries = apply_faults(&synthesis.streams, faults, seed);
    let last_arrival = deliveries.last().map_or(0, |d| d.arrival_ms);
    let end_ms = synthesis.duration_ms.max(last_arrival)
        + config.hub.reorder_horizon_ms
        + config.detection.double_gap_ms()
        + 1000;
    let schedule = build_schedule(&deliveries, &synthesis.commands, end_ms, config.hub.tick_ms);
    Ok(PreparedRun { synthesis, deliveries, schedule, end_ms })
}

/// Runs a prepared session on the virtual clock against an in-memory store.
pub fn run_fast(run: &PreparedRun, config: &HubConfig) -> (Hub, RunOutcome) {
    let store = MetricsStore::in_memory().with_day_parts(config.day_parts);
    let mut hub = Hub::new(config.clone(), store, run.synthesis.start_at);
    hub.enable_tracing();
    let outcome = run_schedule(&mut hub, &run.schedule);
    (hub, outcome)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RepCounts {
    pub sts_singles: usize,
    pub sts_doubles: usize,
    pub lift_singles: usize,
    pub lift_doubles: usize,
}

impl RepCounts {
    pub fn of_events(events: &[HubEvent]) -> Self {
        let mut c = RepCounts::default();
        for e in events.iter().filter_map(|e| e.body.repetition()) {
            match (e.kind, e.rep_type) {
                (RepKind::SitToStand, RepType::Single) => c.sts_singles += 1,
                (RepKind::SitToStand, RepType::Double) => c.sts_doubles += 1,
                (RepKind::Lift, RepType::Single) => c.lift_singles += 1,
                (RepKind::Lift, RepType::Double) => c.lift_doubles += 1,
            }
        }
        c
    }

    pub fn of_truth(synthesis: &Synthesis) -> Self {
        let (sts_singles, sts_doubles) = synthesis.truth.sts_counts();
        let (lift_singles, lift_doubles) = synthesis.truth.lift_counts();
        RepCounts { sts_singles, sts_doubles, lift_singles, lift_doubles }
    }

    pub fn total(&self) -> usize {
        self.sts_singles + self.sts_doubles + self.lift_singles + self.lift_doubles
    }
}

/// Sit-to-stand events as (type, duration ms) for exact comparisons.
pub type RepSignature = (RepType, u64);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    /// Logged sit-to-stand events of station 0.
    pub streaming: Vec<RepSignature>,
    /// Offline segmentation of the same station trace, paired.
    pub offline: Vec<RepSignature>,
    pub streaming_cycles: usize,
    pub offline_cycles: usize,
    /// Logged lift events of band 0.
    pub lift_streaming: Vec<RepSignature>,
    /// A fresh lift detector over the band trace, paired in batch.
    pub lift_offline: Vec<RepSignature>,
}

impl OracleReport {
    pub fn agrees(&self) -> bool {
        self.streaming == self.offline && self.lift_streaming == self.lift_offline
    }
}

fn signature<R: crate::detect::TimedRecord>(p: &Paired<R>) -> RepSignature {
    let t = if matches!(p, Paired::Double(..)) { RepType::Double } else { RepType::Single };
    (t, p.end_ms() - p.start_ms())
}

/// Compares what the hub logged for station 0 with the offline oracle run
/// over the exact samples the station's detector consumed.
pub fn oracle_report(hub: &Hub, events: &[HubEvent], config: &HubConfig) -> OracleReport {
    let logged = |kind: RepKind| -> Vec<RepSignature> {
        events
            .iter()
            .filter_map(|e| match &e.body {
                EventBody::RepetitionLogged { event, .. } if event.kind == kind => {
                    Some((event.rep_type, (event.duration_s * 1000.0).round() as u64))
                }
                _ => None,
            })
            .collect()
    };
    let (samples, records) = hub.station(0).and_then(|s| s.trace()).unwrap_or((&[], &[]));
    let offline_records = offline_segment(&StationTrace::from_samples(samples), &config.detection);
    let offline = classify_pairing(&offline_records, &config.detection).iter().map(signature).collect();

    let lift_samples = hub.band(0).and_then(|b| b.trace()).map_or(&[][..], |(s, _)| s);
    let mut detector = LiftDetector::new(config.detection.lift.clone());
    let lifts: Vec<_> = lift_samples.iter().filter_map(|s| detector.step(s).record).collect();
    let lift_offline = classify_pairing(&lifts, &config.detection).iter().map(signature).collect();
    OracleReport {
        streaming: logged(RepKind::SitToStand),
        offline,
        streaming_cycles: records.len(),
        offline_cycles: offline_records.len(),
        lift_streaming: logged(RepKind::Lift),
        lift_offline,
    }
}
