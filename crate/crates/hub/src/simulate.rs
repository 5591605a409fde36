//! End-to-end simulated sessions on the virtual or the wall clock.

use homesense_core::hub::{apply_action, Hub, HubConfig, HubEvent, HubStats, RunOutcome, ScheduledAction};
use homesense_core::metrics::MetricsStore;
use homesense_core::session::{prepare, PreparedRun, RepCounts};
use homesense_core::sim::{FaultProfile, ScenarioScript};
use std::path::Path;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Fast,
    Realtime,
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub outcome: RunOutcome,
    pub detected: RepCounts,
    pub truth: RepCounts,
    pub stats: HubStats,
    /// Wall-clock delay from the triggering sample's receipt to each event, ms.
    /// Empty in fast mode.
    pub latencies_ms: Vec<f64>,
}

impl SimulationResult {
    pub fn latency_p95(&self) -> Option<f64> {
        percentile(&self.latencies_ms, 0.95)
    }
}

/// Nearest-rank percentile.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Some(v[rank - 1])
}

pub fn simulate(
    script: &ScenarioScript,
    seed: u64,
    faults: &FaultProfile,
    config: &HubConfig,
    mode: Mode,
    store: Option<&Path>,
) -> Result<(Hub, SimulationResult), String> {
    let prepared = prepare(script, seed, faults, config).map_err(|e| e.to_string())?;
    let mut hub = match store {
        Some(dir) => Hub::open(config.clone(), dir, prepared.synthesis.start_at)?,
        None => Hub::new(
            config.clone(),
            MetricsStore::in_memory().with_day_parts(config.day_parts),
            prepared.synthesis.start_at,
        ),
    };
    hub.enable_tracing();
    let (outcome, latencies_ms) = match mode {
        Mode::Fast => (homesense_core::hub::run_schedule(&mut hub, &prepared.schedule), Vec::new()),
        Mode::Realtime => run_realtime(&mut hub, &prepared.schedule),
    };
    let result = summarize(&prepared, &hub, outcome, latencies_ms);
    Ok((hub, result))
}

fn summarize(prepared: &PreparedRun, hub: &Hub, outcome: RunOutcome, latencies_ms: Vec<f64>) -> SimulationResult {
    SimulationResult {
        detected: RepCounts::of_events(&outcome.events),
        truth: RepCounts::of_truth(&prepared.synthesis),
        stats: hub.stats(),
        outcome,
        latencies_ms,
    }
}

/// Plays the schedule against the wall clock, timing every event that has a
/// triggering sample.
pub fn run_realtime(hub: &mut Hub, schedule: &[ScheduledAction]) -> (RunOutcome, Vec<f64>) {
    let t0 = Instant::now();
    let mut out = RunOutcome { events: hub.start(), acks: Vec::new() };
    let mut latencies = Vec::new();
    for a in schedule {
        let due = t0 + Duration::from_millis(a.at_ms);
        let now = Instant::now();
        if due > now {
            std::thread::sleep(due - now);
        }
        let events = apply_action(hub, a, &mut out.acks);
        let elapsed = t0.elapsed().as_secs_f64() * 1000.0;
        latencies.extend(events.iter().filter_map(|e| e.trigger_ms).map(|t| (elapsed - t as f64).max(0.0)));
        out.events.extend(events);
    }
    out.events.extend(hub.finish());
    (out, latencies)
}

/// Human summary printed by `homesense simulate`.
pub fn render_summary(result: &SimulationResult, mode: Mode) -> String {
    let d = result.detected;
    let plural = |n: usize, w: &str| if n == 1 { format!("{n} {w}") } else { format!("{n} {w}s") };
    let mut lines = vec![
        format!("events: {}", result.outcome.events.len()),
        format!("sit-to-stand: {} detected, {} detected", plural(d.sts_doubles, "double"), plural(d.sts_singles, "single")),
        format!("lift: {} detected, {} detected", plural(d.lift_doubles, "double"), plural(d.lift_singles, "single")),
        format!(
            "ground truth: sit-to-stand {}/{} double/single, lift {}/{} double/single",
            result.truth.sts_doubles, result.truth.sts_singles, result.truth.lift_doubles, result.truth.lift_singles
        ),
        format!(
            "packets: {} released, {} duplicates, {} late drops, {} suppressed while paused",
            result.stats.released, result.stats.duplicates, result.stats.late_drops, result.stats.suppressed
        ),
    ];
    if mode == Mode::Realtime {
        match result.latency_p95() {
            Some(p) => lines.push(format!("latency p95: {p:.1} ms over {} events", result.latencies_ms.len())),
            None => lines.push("latency p95: n/a".into()),
        }
    }
    lines.join("\n") + "\n"
}

pub fn events_jsonl(events: &[HubEvent]) -> String {
    events.iter().map(|e| serde_json::to_string(e).expect("event serializes") + "\n").collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.95), Some(19.0));
        assert_eq!(percentile(&v, 1.0), Some(20.0));
        assert_eq!(percentile(&[], 0.5), None);
        assert_eq!(percentile(&[3.0], 0.95), Some(3.0));
    }
}
