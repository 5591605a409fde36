//! UI-facing message types.
//!
//! Every message is JSON. Events carry a hub-global `seq`; a client that
//! reconnects asks for everything from the last `seq` it saw.

use crate::detect::{RepKind, Stage};
use crate::metrics::{DailyMetrics, RepetitionEvent};
use crate::progression::PromptKind;
use crate::wire::RegistryEntry;
use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Command {
    Pause,
    Resume,
    MaskOn,
    MaskOff,
    AcceptGoal {
        #[serde(default)]
        value: Option<u32>,
    },
    DeclineGoal,
    Recalibrate,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "error", content = "message", rename_all = "snake_case")]
pub enum CommandError {
    #[error("state error: {0}")]
    State(String),
    #[error("value error: {0}")]
    Value(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TodayCounts {
    pub date: NaiveDate,
    pub singles: u32,
    pub doubles: u32,
    pub goal: u32,
    pub lift_singles: u32,
    pub lift_doubles: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventBody {
    StageChanged {
        station: u8,
        from: Stage,
        to: Stage,
        /// 0..=4, position of `to` in the five-stage walk.
        stage: u8,
        label: String,
    },
    RepetitionLogged {
        event: RepetitionEvent,
        masked: bool,
        /// `false` when the store rejected the write.
        stored: bool,
        /// Withheld while masked.
        today: Option<TodayCounts>,
    },
    GoalPrompt {
        #[serde(rename = "prompt")]
        kind: PromptKind,
        n: u32,
        goal: u32,
        text: String,
        window_end: NaiveDate,
        doubles: [u32; 7],
    },
    SensorStatus {
        source: String,
        status: String,
        detail: Option<String>,
    },
    DailyRollover {
        date: NaiveDate,
        /// Withheld while masked.
        summary: Option<DailyMetrics>,
    },
}

impl EventBody {
    pub fn kind_name(&self) -> &'static str {
        match self {
            EventBody::StageChanged { .. } => "stage_changed",
            EventBody::RepetitionLogged { .. } => "repetition_logged",
            EventBody::GoalPrompt { .. } => "goal_prompt",
            EventBody::SensorStatus { .. } => "sensor_status",
            EventBody::DailyRollover { .. } => "daily_rollover",
        }
    }

    pub fn repetition(&self) -> Option<&RepetitionEvent> {
        match self {
            EventBody::RepetitionLogged { event, .. } => Some(event),
            _ => None,
        }
    }

    pub fn is_sts(&self) -> bool {
        self.repetition().is_some_and(|e| e.kind == RepKind::SitToStand)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubEvent {
    pub seq: u64,
    pub at: NaiveDateTime,
    /// Session-clock receipt time of the sample that triggered the event.
    pub trigger_ms: Option<u64>,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Debug, Clone)]
pub struct EventRing {
    capacity: usize,
    events: VecDeque<HubEvent>,
    next_seq: u64,
}

impl EventRing {
    pub fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(1), events: VecDeque::new(), next_seq: 1 }
    }

    pub fn push(&mut self, at: NaiveDateTime, trigger_ms: Option<u64>, body: EventBody) -> HubEvent {
        let ev = HubEvent { seq: self.next_seq, at, trigger_ms, body };
        self.next_seq += 1;
        if self.events.len() == self.capacity {
            self.events.pop_front();
        }
        self.events.push_back(ev.clone());
        ev
    }

    /// Seq of the most recent event, 0 when none.
    pub fn last_seq(&self) -> u64 {
        self.next_seq - 1
    }

    /// Events with `seq >= from`. The flag is `true` when some requested
    /// events have already been evicted.
    pub fn since(&self, from: u64) -> (Vec<HubEvent>, bool) {
        let oldest = self.events.front().map_or(self.next_seq, |e| e.seq);
        let evicted = from < oldest && from < self.next_seq && from > 0 && oldest > 1;
        (self.events.iter().filter(|e| e.seq >= from).cloned().collect(), evicted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionMode {
    Active,
    Paused,
    MaskedActive,
    MaskedPaused,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationView {
    pub station: u8,
    pub stage: Stage,
    pub label: String,
    pub calibrated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptView {
    pub kind: PromptKind,
    pub n: u32,
    pub text: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HubStats {
    pub logged: u64,
    pub suppressed: u64,
    pub duplicates: u64,
    pub late_drops: u64,
    pub decode_errors: u64,
    pub store_errors: u64,
    pub released: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub mode: SessionMode,
    pub paused: bool,
    pub masked: bool,
    pub now: NaiveDateTime,
    pub peripherals: Vec<RegistryEntry>,
    pub stations: Vec<StationView>,
    pub goal: u32,
    /// Withheld while masked.
    pub today: Option<TodayCounts>,
    pub pending_prompt: Option<PromptView>,
    pub last_seq: u64,
    pub stats: HubStats,
}
