//! The hub: ingest, ordering, detection, logging, goal progression and the
//! event stream consumed by the touchscreen UI.
//!
//! All time inside the hub is the session clock, milliseconds since the
//! session start (`start_at`). Simulation drives it virtually; the server
//! drives it from the wall clock.

mod config;
mod driver;
mod events;
mod reorder;
mod station;

pub use config::{ConfigFileError, HubConfig, HubSettings, ServerConfig};
pub use driver::{apply_action, build_schedule, run_schedule, DriverAction, RunOutcome, ScheduledAction};
pub use events::{
    Command, CommandError, EventBody, EventRing, HubEvent, HubStats, PromptView, SessionMode, SessionSnapshot,
    StationView, TodayCounts,
};
pub use reorder::{ReorderBuffer, ReorderStats, Released, DEFAULT_HORIZON_MS};
pub use station::{BandPipeline, StationOutput, StationPipeline};

use crate::detect::{CycleRecord, LiftMetrics, LiftRecord, Paired, RepKind, RepType};
use crate::metrics::{mean, MetricsStore, RepetitionEvent};
use crate::progression::{
    accept_prompt, weekly_goal_check, Decision, GoalState, ProgressionError, PromptKind, PromptRecord,
};
use crate::wire::{
    decode_packet, IngestVerdict, Payload, PeripheralId, PeripheralKind, PeripheralPacket, PeripheralStatus, Registry,
    StatusTransition,
};
use chrono::{Duration, NaiveDate, NaiveDateTime};
use std::collections::BTreeMap;
use std::path::PathBuf;

pub const GOAL_FILE: &str = "goal.json";

pub struct Hub {
    config: HubConfig,
    start_at: NaiveDateTime,
    now_ms: u64,
    today: NaiveDate,
    registry: Registry,
    buffer: ReorderBuffer,
    stations: BTreeMap<u8, StationPipeline>,
    bands: BTreeMap<u8, BandPipeline>,
    store: MetricsStore,
    goal: GoalState,
    goal_path: Option<PathBuf>,
    paused_since: Option<u64>,
    paused: Vec<(u64, u64)>,
    masked: bool,
    ring: EventRing,
    stats: HubStats,
    tracing: bool,
}

impl std::fmt::Debug for Hub {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Hub").field("now_ms", &self.now_ms).field("start_at", &self.start_at).finish()
    }
}

impl Hub {
    pub fn new(config: HubConfig, store: MetricsStore, start_at: NaiveDateTime) -> Self {
        let goal = GoalState::new(&config.progression);
        let mut hub = Self {
            registry: Registry::new(config.hub.registry),
            buffer: ReorderBuffer::new(config.hub.reorder_horizon_ms),
            ring: EventRing::new(config.hub.ring_capacity),
            config,
            start_at,
            now_ms: 0,
            today: start_at.date(),
            stations: BTreeMap::new(),
            bands: BTreeMap::new(),
            store,
            goal,
            goal_path: None,
            paused_since: None,
            paused: Vec::new(),
            masked: false,
            stats: HubStats::default(),
            tracing: false,
        };
        if let Some(first) = hub.store.first_day() {
            hub.goal.anchor_from(first);
        }
        hub
    }

    /// Hub backed by a store directory, with goal state persisted next to it.
    pub fn open(config: HubConfig, store_dir: &std::path::Path, start_at: NaiveDateTime) -> Result<Self, String> {
        let store = MetricsStore::open_with(store_dir, config.day_parts).map_err(|e| e.to_string())?;
        let goal_path = store_dir.join(GOAL_FILE);
        let mut hub = Hub::new(config, store, start_at);
        if goal_path.exists() {
            let text = std::fs::read_to_string(&goal_path).map_err(|e| e.to_string())?;
            hub.goal = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", goal_path.display()))?;
        }
        if let Some(first) = hub.store.first_day() {
            hub.goal.anchor_from(first);
        }
        hub.goal_path = Some(goal_path);
        Ok(hub)
    }

    /// Keeps station samples and detector records for oracle checks.
    pub fn enable_tracing(&mut self) {
        self.tracing = true;
        self.stations.values_mut().for_each(StationPipeline::record_trace);
        self.bands.values_mut().for_each(BandPipeline::record_trace);
    }

    pub fn station(&self, instance: u8) -> Option<&StationPipeline> {
        self.stations.get(&instance)
    }

    pub fn band(&self, instance: u8) -> Option<&BandPipeline> {
        self.bands.get(&instance)
    }

    pub fn store(&self) -> &MetricsStore {
        &self.store
    }

    pub fn goal(&self) -> &GoalState {
        &self.goal
    }

    pub fn config(&self) -> &HubConfig {
        &self.config
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    pub fn local_time(&self, ms: i64) -> NaiveDateTime {
        self.start_at + Duration::milliseconds(ms)
    }

    pub fn stats(&self) -> HubStats {
        let r = self.buffer.stats();
        HubStats { late_drops: r.late_drops, released: r.released, ..self.stats }
    }

    pub fn events_since(&self, seq: u64) -> (Vec<HubEvent>, bool) {
        self.ring.since(seq)
    }

    pub fn last_seq(&self) -> u64 {
        self.ring.last_seq()
    }

    fn emit(&mut self, body: EventBody, trigger: Option<u64>, out: &mut Vec<HubEvent>) {
        let at = self.local_time(self.now_ms as i64);
        out.push(self.ring.push(at, trigger, body));
    }

    /// Emits events due at session start: pending weekly checks.
    pub fn start(&mut self) -> Vec<HubEvent> {
        let mut out = Vec::new();
        self.weekly_checks(&mut out);
        out
    }

    /// Accepts a datagram. Undecodable bytes are counted and ignored.
    pub fn receive_bytes(&mut self, bytes: &[u8], receipt_ms: u64) -> Vec<HubEvent> {
        match decode_packet(bytes) {
            Ok(p) => self.receive(p, receipt_ms),
            Err(_) => {
                self.stats.decode_errors += 1;
                Vec::new()
            }
        }
    }

    pub fn receive(&mut self, packet: PeripheralPacket, receipt_ms: u64) -> Vec<HubEvent> {
        let mut out = Vec::new();
        self.now_ms = self.now_ms.max(receipt_ms);
        let (verdict, transition) = self.registry.ingest(&packet, receipt_ms);
        if let Some(t) = transition {
            self.status_event(t, &mut out);
        }
        match verdict {
            IngestVerdict::Duplicate => self.stats.duplicates += 1,
            IngestVerdict::Fresh | IngestVerdict::Reordered => {
                self.buffer.push(packet, receipt_ms);
            }
        }
        out
    }

    /// Advances the session clock: day rollover, registry timeouts, releases
    /// from the reorder buffer and pairing timeouts.
    pub fn advance(&mut self, now_ms: u64) -> Vec<HubEvent> {
        let mut out = Vec::new();
        self.now_ms = self.now_ms.max(now_ms);
        self.rollover(&mut out);
        for t in self.registry.sweep(self.now_ms) {
            self.status_event(t, &mut out);
        }
        for r in self.buffer.release(self.now_ms) {
            self.process(r, &mut out);
        }
        let watermark = self.now_ms as i64 - self.buffer.horizon_ms() as i64;
        self.poll_pairings(watermark, &mut out);
        out
    }

    /// Ends the session: releases everything buffered and pending.
    pub fn finish(&mut self) -> Vec<HubEvent> {
        let mut out = Vec::new();
        for r in self.buffer.flush() {
            self.process(r, &mut out);
        }
        let instances: Vec<u8> = self.stations.keys().copied().collect();
        for i in instances {
            if let Some(p) = self.stations.get_mut(&i).and_then(StationPipeline::flush) {
                self.log_sts(i, p, None, &mut out);
            }
        }
        let instances: Vec<u8> = self.bands.keys().copied().collect();
        for i in instances {
            if let Some(p) = self.bands.get_mut(&i).and_then(BandPipeline::flush) {
                self.log_lift(i, p, None, &mut out);
            }
        }
        if let Err(e) = self.store.checkpoint() {
            self.stats.store_errors += 1;
            let body = EventBody::SensorStatus { source: "store".into(), status: "error".into(), detail: Some(e.to_string()) };
            self.emit(body, None, &mut out);
        }
        out
    }

    fn status_event(&mut self, t: StatusTransition, out: &mut Vec<HubEvent>) {
        let status = match t.to {
            PeripheralStatus::Active => "active",
            PeripheralStatus::Stale => "stale",
            PeripheralStatus::Departed => "departed",
        };
        let detail = t.from.map(|f| format!("was {}", format!("{f:?}").to_lowercase()));
        self.emit(EventBody::SensorStatus { source: t.id.to_string(), status: status.into(), detail }, None, out);
    }

    fn station_mut(&mut self, instance: u8) -> &mut StationPipeline {
        let (cfg, min, tracing) = (&self.config.detection, self.config.hub.min_baseline_load, self.tracing);
        self.stations.entry(instance).or_insert_with(|| {
            let mut s = StationPipeline::new(instance, cfg.clone(), min);
            if tracing {
                s.record_trace();
            }
            s
        })
    }

    fn band_mut(&mut self, instance: u8) -> &mut BandPipeline {
        let (cfg, tracing) = (&self.config.detection, self.tracing);
        self.bands.entry(instance).or_insert_with(|| {
            let mut b = BandPipeline::new(instance, cfg);
            if tracing {
                b.record_trace();
            }
            b
        })
    }

    fn process(&mut self, r: Released, out: &mut Vec<HubEvent>) {
        let id = r.packet.id;
        let trigger = Some(r.receipt_ms);
        match (&r.packet.payload, id.kind) {
            (Payload::PressureFrame(f), PeripheralKind::FloorMat) => self.station_mut(id.instance).on_mat(f),
            (Payload::PressureFrame(f), k @ (PeripheralKind::ArmrestLeft | PeripheralKind::ArmrestRight)) => {
                self.station_mut(id.instance).on_armrest(k, f)
            }
            (Payload::PressureFrame(f), PeripheralKind::SeatCushion) => {
                let o = self.station_mut(id.instance).on_cushion(r.packet.device_time_ms, f);
                if let Some(baseline) = o.calibrated {
                    let body = EventBody::SensorStatus {
                        source: format!("station:{}", id.instance),
                        status: "calibrated".into(),
                        detail: Some(format!("baseline {baseline:.1}")),
                    };
                    self.emit(body, trigger, out);
                }
                for (from, to) in o.transitions {
                    let body = EventBody::StageChanged {
                        station: id.instance,
                        from,
                        to,
                        stage: to.index(),
                        label: to.label().into(),
                    };
                    self.emit(body, trigger, out);
                }
                for p in o.paired {
                    self.log_sts(id.instance, p, trigger, out);
                }
            }
            (Payload::CanBand(c), PeripheralKind::CanBand) => {
                let paired = self.band_mut(id.instance).on_sample(r.packet.device_time_ms, c);
                for p in paired {
                    self.log_lift(id.instance, p, trigger, out);
                }
            }
            _ => {}
        }
    }

    fn poll_pairings(&mut self, watermark: i64, out: &mut Vec<HubEvent>) {
        let instances: Vec<u8> = self.stations.keys().copied().collect();
        for i in instances {
            let Some(offset) = self.buffer.offset(PeripheralId::new(PeripheralKind::SeatCushion, i)) else { continue };
            let device_now = watermark - offset;
            if device_now < 0 {
                continue;
            }
            if let Some(p) = self.stations.get_mut(&i).and_then(|s| s.poll(device_now as u64)) {
                self.log_sts(i, p, None, out);
            }
        }
        let instances: Vec<u8> = self.bands.keys().copied().collect();
        for i in instances {
            let Some(offset) = self.buffer.offset(PeripheralId::new(PeripheralKind::CanBand, i)) else { continue };
            let device_now = watermark - offset;
            if device_now < 0 {
                continue;
            }
            if let Some(p) = self.bands.get_mut(&i).and_then(|b| b.poll(device_now as u64)) {
                self.log_lift(i, p, None, out);
            }
        }
    }

    fn to_session_ms(&self, id: PeripheralId, device_ms: u64) -> i64 {
        device_ms as i64 + self.buffer.offset(id).unwrap_or(0)
    }

    fn paused_at(&self, ms: i64) -> bool {
        let ms = ms.max(0) as u64;
        self.paused.iter().any(|&(a, b)| ms >= a && ms < b) || self.paused_since.is_some_and(|a| ms >= a)
    }

    fn log_sts(&mut self, instance: u8, p: Paired<CycleRecord>, trigger: Option<u64>, out: &mut Vec<HubEvent>) {
        let id = PeripheralId::new(PeripheralKind::SeatCushion, instance);
        let (rep_type, leaning, symmetry) = match &p {
            Paired::Single(r) => (RepType::Single, r.balance_leaning, r.symmetry),
            Paired::Double(a, b) => {
                let sym: Vec<f64> = a.symmetry.into_iter().chain(b.symmetry).collect();
                (RepType::Double, a.balance_leaning.union(b.balance_leaning), mean(&sym))
            }
        };
        let start = self.to_session_ms(id, p.start_ms());
        let end = self.to_session_ms(id, p.end_ms());
        let signature = self.stations.get(&instance).map(StationPipeline::signature).unwrap_or_default();
        let event = RepetitionEvent {
            occurred_at: self.local_time(start),
            kind: RepKind::SitToStand,
            rep_type,
            duration_s: p.duration_s(),
            sensor_signature: signature,
            balance_leaning: Some(leaning),
            lift_metrics: None,
            symmetry,
        };
        self.log(event, end, trigger, out);
    }

    fn log_lift(&mut self, instance: u8, p: Paired<LiftRecord>, trigger: Option<u64>, out: &mut Vec<HubEvent>) {
        let id = PeripheralId::new(PeripheralKind::CanBand, instance);
        let records: Vec<&LiftRecord> = match &p {
            Paired::Single(r) => vec![r],
            Paired::Double(a, b) => vec![a, b],
        };
        let metrics = LiftMetrics {
            distance_m: mean(&records.iter().map(|r| r.distance_m).collect::<Vec<_>>()).unwrap_or(0.0),
            grip_avg_n: mean(&records.iter().map(|r| r.grip_avg_n).collect::<Vec<_>>()).unwrap_or(0.0),
            grip_peak_n: records.iter().map(|r| r.grip_peak_n).fold(0.0, f64::max),
        };
        let rep_type = if records.len() == 2 { RepType::Double } else { RepType::Single };
        let start = self.to_session_ms(id, p.start_ms());
        let end = self.to_session_ms(id, p.end_ms());
        let signature = self.bands.get(&instance).map(BandPipeline::signature).unwrap_or_default();
        let event = RepetitionEvent {
            occurred_at: self.local_time(start),
            kind: RepKind::Lift,
            rep_type,
            duration_s: p.duration_s(),
            sensor_signature: signature,
            balance_leaning: None,
            lift_metrics: Some(metrics),
            symmetry: None,
        };
        self.log(event, end, trigger, out);
    }

    fn log(&mut self, event: RepetitionEvent, end_ms: i64, trigger: Option<u64>, out: &mut Vec<HubEvent>) {
        if self.paused_at(end_ms) {
            self.stats.suppressed += 1;
            return;
        }
        let stored = match self.store.ingest_event(&event) {
            Ok(_) => true,
            Err(e) => {
                self.stats.store_errors += 1;
                let body =
                    EventBody::SensorStatus { source: "store".into(), status: "error".into(), detail: Some(e.to_string()) };
                self.emit(body, trigger, out);
                false
            }
        };
        if stored {
            self.stats.logged += 1;
            if self.goal.week_anchor.is_none() {
                self.goal.anchor_from(event.date());
                self.save_goal();
            }
        }
        let today = (!self.masked).then(|| self.today_counts());
        let body = EventBody::RepetitionLogged { event, masked: self.masked, stored, today };
        self.emit(body, trigger, out);
    }

    fn today_counts(&self) -> TodayCounts {
        let d = self.store.day(self.today);
        TodayCounts {
            date: self.today,
            singles: d.map_or(0, |d| d.singles),
            doubles: d.map_or(0, |d| d.doubles),
            goal: self.goal.goal,
            lift_singles: d.map_or(0, |d| d.canband.singles),
            lift_doubles: d.map_or(0, |d| d.canband.doubles),
        }
    }

    fn rollover(&mut self, out: &mut Vec<HubEvent>) {
        let date = self.local_time(self.now_ms as i64).date();
        if date <= self.today {
            return;
        }
        let summary = (!self.masked).then(|| self.store.daily_summary(self.today).0);
        let body = EventBody::DailyRollover { date: self.today, summary };
        self.emit(body, None, out);
        self.today = date;
        self.weekly_checks(out);
    }

    fn weekly_checks(&mut self, out: &mut Vec<HubEvent>) {
        let due = self.goal.due_windows(self.today);
        if due.is_empty() {
            return;
        }
        for end in due {
            let doubles = self.store.weekly_window(end);
            let (n, mut prompt) = weekly_goal_check(self.goal.goal, &doubles, self.config.progression.comparator);
            prompt.issued_at = Some(self.local_time(self.now_ms as i64));
            let text = prompt.text(&self.config.progression);
            if prompt.kind == PromptKind::IncreaseOffer {
                self.goal.pending_prompt = Some(prompt.clone());
            } else if self.goal.pending_prompt.as_ref().is_some_and(|p| p.kind == PromptKind::IncreaseOffer) {
                self.goal.pending_prompt = None;
            }
            let body = EventBody::GoalPrompt { kind: prompt.kind, n, goal: self.goal.goal, text, window_end: end, doubles };
            self.emit(body, None, out);
        }
        self.save_goal();
    }

    fn save_goal(&mut self) {
        let Some(path) = &self.goal_path else { return };
        let json = serde_json::to_string_pretty(&self.goal).expect("goal serializes");
        if std::fs::write(path, json).is_err() {
            self.stats.store_errors += 1;
        }
    }

    pub fn command(&mut self, cmd: Command, now_ms: u64) -> Result<SessionSnapshot, CommandError> {
        self.now_ms = self.now_ms.max(now_ms);
        match cmd {
            Command::Pause => {
                self.paused_since.get_or_insert(self.now_ms);
            }
            Command::Resume => {
                if let Some(from) = self.paused_since.take() {
                    self.paused.push((from, self.now_ms));
                }
            }
            Command::MaskOn => self.masked = true,
            Command::MaskOff => self.masked = false,
            Command::AcceptGoal { value } => self.resolve(Decision::Accepted, value)?,
            Command::DeclineGoal => self.resolve(Decision::Declined, None)?,
            Command::Recalibrate => self.stations.values_mut().for_each(StationPipeline::recalibrate),
        }
        Ok(self.snapshot())
    }

    fn resolve(&mut self, decision: Decision, value: Option<u32>) -> Result<(), CommandError> {
        self.goal = accept_prompt(&self.goal, decision, value).map_err(|e| match e {
            ProgressionError::StateError => CommandError::State(e.to_string()),
            ProgressionError::ValueError { .. } => CommandError::Value(e.to_string()),
        })?;
        self.save_goal();
        Ok(())
    }

    pub fn mode(&self) -> SessionMode {
        match (self.paused_since.is_some(), self.masked) {
            (false, false) => SessionMode::Active,
            (false, true) => SessionMode::MaskedActive,
            (true, false) => SessionMode::Paused,
            (true, true) => SessionMode::MaskedPaused,
        }
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        let pending_prompt = self.goal.pending_prompt.as_ref().filter(|p| is_open(p)).map(|p| PromptView {
            kind: p.kind,
            n: p.days_met,
            text: p.text(&self.config.progression),
        });
        SessionSnapshot {
            mode: self.mode(),
            paused: self.paused_since.is_some(),
            masked: self.masked,
            now: self.local_time(self.now_ms as i64),
            peripherals: self.registry.snapshot(),
            stations: self
                .stations
                .values()
                .map(|s| StationView {
                    station: s.instance(),
                    stage: s.stage(),
                    label: s.stage().label().into(),
                    calibrated: s.baseline().is_some(),
                })
                .collect(),
            goal: self.goal.goal,
            today: (!self.masked).then(|| self.today_counts()),
            pending_prompt,
            last_seq: self.ring.last_seq(),
            stats: self.stats(),
        }
    }
}

fn is_open(p: &PromptRecord) -> bool {
    p.kind == PromptKind::IncreaseOffer && p.resolution == crate::progression::Resolution::Pending
}
