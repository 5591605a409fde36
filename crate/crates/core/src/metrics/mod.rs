//! Daily metrics, movement-quality measures and the local event store.
//!
//! The store is an append-only JSON-lines event log (`events.jsonl`) plus a
//! checkpointed aggregate file (`aggregates.json`). The log is the source of
//! truth; aggregates can always be rebuilt by replaying it.
//!
//! Event log line (one JSON object per line, fields in this order):
//!
//! | field | type | notes |
//! |-------|------|-------|
//! | `ts` | string | local time `YYYY-MM-DDTHH:MM:SS[.fff]` |
//! | `kind` | `"sit_to_stand"` \| `"lift"` | |
//! | `rep_type` | `"single"` \| `"double"` | |
//! | `duration_s` | number | first movement start to last movement end |
//! | `sensor_signature` | string | `+`-joined peripheral ids, e.g. `seat:0+mat:0` |
//! | `balance_leaning` | `"none"` \| `"left"` \| `"right"` \| `"both"` \| null | sit-to-stand only |
//! | `lift_metrics` | object \| null | `{distance_m, grip_avg_n, grip_peak_n}`, lifts only |
//! | `symmetry` | number \| null | foot-load symmetry over the rising phase |
//!
//! The aggregate file is a JSON object keyed by ISO-8601 date, each value a
//! [`DailyMetrics`].

mod store;
mod summary;

pub use store::{IngestError, MetricsStore, StoreError, AGGREGATE_FILE, EVENT_LOG_FILE};
pub use summary::{CanBandRow, DayRow, WeeklySummary};

use crate::detect::{BalanceLeaning, LiftMetrics, RepKind, RepType};
use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

/// One validated repetition as stored in the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionEvent {
    #[serde(rename = "ts")]
    pub occurred_at: NaiveDateTime,
    #[serde(with = "snake_kind")]
    pub kind: RepKind,
    #[serde(with = "snake_rep")]
    pub rep_type: RepType,
    pub duration_s: f64,
    pub sensor_signature: String,
    #[serde(with = "snake_lean")]
    pub balance_leaning: Option<BalanceLeaning>,
    pub lift_metrics: Option<LiftMetrics>,
    #[serde(default)]
    pub symmetry: Option<f64>,
}

impl RepetitionEvent {
    pub fn date(&self) -> NaiveDate {
        self.occurred_at.date()
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.duration_s.is_finite() && self.duration_s >= 0.0) {
            return Err(format!("duration {} must be finite and non-negative", self.duration_s));
        }
        match self.kind {
            RepKind::SitToStand => {
                if self.balance_leaning.is_none() || self.lift_metrics.is_some() {
                    return Err("sit-to-stand events carry balance leaning and no lift metrics".into());
                }
            }
            RepKind::Lift => {
                let Some(m) = self.lift_metrics else {
                    return Err("lift events carry lift metrics".into());
                };
                if self.balance_leaning.is_some() {
                    return Err("lift events carry no balance leaning".into());
                }
                if !(m.grip_avg_n >= 0.0 && m.grip_peak_n >= 0.0 && m.distance_m >= 0.0) {
                    return Err("lift metrics must be non-negative".into());
                }
            }
        }
        if self.symmetry.is_some_and(|s| !(0.0..=1.0).contains(&s)) {
            return Err("symmetry must lie in [0, 1]".into());
        }
        Ok(())
    }
}

macro_rules! snake_enum {
    ($module:ident, $ty:ty, { $($variant:path => $name:literal),+ $(,)? }) => {
        mod $module {
            use super::*;
            use serde::{de::Error, Deserializer, Serializer};

            pub fn serialize<S: Serializer>(v: &$ty, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(match v { $($variant => $name),+ })
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<$ty, D::Error> {
                let name = String::deserialize(d)?;
                match name.as_str() {
                    $($name => Ok($variant),)+
                    other => Err(D::Error::custom(format!("unknown value `{other}`"))),
                }
            }
        }
    };
}

snake_enum!(snake_kind, RepKind, { RepKind::SitToStand => "sit_to_stand", RepKind::Lift => "lift" });
snake_enum!(snake_rep, RepType, { RepType::Single => "single", RepType::Double => "double" });

mod snake_lean {
    use super::*;
    use serde::{de::Error, Deserializer, Serializer};

    pub fn name(v: BalanceLeaning) -> &'static str {
        match v {
            BalanceLeaning::None => "none",
            BalanceLeaning::Left => "left",
            BalanceLeaning::Right => "right",
            BalanceLeaning::Both => "both",
        }
    }

    pub fn serialize<S: Serializer>(v: &Option<BalanceLeaning>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.serialize_str(name(*v)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BalanceLeaning>, D::Error> {
        let Some(name) = Option::<String>::deserialize(d)? else {
            return Ok(None);
        };
        Ok(Some(match name.as_str() {
            "none" => BalanceLeaning::None,
            "left" => BalanceLeaning::Left,
            "right" => BalanceLeaning::Right,
            "both" => BalanceLeaning::Both,
            other => return Err(D::Error::custom(format!("unknown leaning `{other}`"))),
        }))
    }
}

pub fn leaning_name(v: BalanceLeaning) -> &'static str {
    snake_lean::name(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedDuration {
    pub duration_s: f64,
    pub ts: NaiveDateTime,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeanCounts {
    pub left: u32,
    pub right: u32,
    pub both: u32,
}

/// Day-part boundaries in local hours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayParts {
    pub afternoon_from_hour: u32,
    pub evening_from_hour: u32,
}

impl Default for DayParts {
    fn default() -> Self {
        Self { afternoon_from_hour: 12, evening_from_hour: 18 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeOfDayHistogram {
    pub morning: u32,
    pub afternoon: u32,
    pub evening: u32,
}

impl TimeOfDayHistogram {
    pub fn total(&self) -> u32 {
        self.morning + self.afternoon + self.evening
    }

    fn add(&mut self, at: NaiveDateTime, parts: DayParts) {
        let h = at.hour();
        if h < parts.afternoon_from_hour {
            self.morning += 1;
        } else if h < parts.evening_from_hour {
            self.afternoon += 1;
        } else {
            self.evening += 1;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CanBandDaily {
    pub singles: u32,
    pub doubles: u32,
    pub double_times: Vec<TimedDuration>,
    pub distances_m: Vec<f64>,
    pub grip_avg_n: Vec<f64>,
    pub grip_peak_n: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyMetrics {
    pub date: NaiveDate,
    pub singles: u32,
    pub doubles: u32,
    pub double_times: Vec<TimedDuration>,
    /// Armrest-assisted doubles by side.
    pub balance_leaning: LeanCounts,
    pub time_of_day: TimeOfDayHistogram,
    /// Per sit-to-stand repetition symmetry values.
    pub symmetry: Vec<f64>,
    pub canband: CanBandDaily,
}

impl DailyMetrics {
    pub fn empty(date: NaiveDate) -> Self {
        Self {
            date,
            singles: 0,
            doubles: 0,
            double_times: Vec::new(),
            balance_leaning: LeanCounts::default(),
            time_of_day: TimeOfDayHistogram::default(),
            symmetry: Vec::new(),
            canband: CanBandDaily::default(),
        }
    }

    pub fn apply(&mut self, ev: &RepetitionEvent, parts: DayParts) {
        match ev.kind {
            RepKind::SitToStand => {
                match ev.rep_type {
                    RepType::Single => self.singles += 1,
                    RepType::Double => {
                        self.doubles += 1;
                        self.double_times.push(TimedDuration { duration_s: ev.duration_s, ts: ev.occurred_at });
                        match ev.balance_leaning.unwrap_or_default() {
                            BalanceLeaning::None => {}
                            BalanceLeaning::Left => self.balance_leaning.left += 1,
                            BalanceLeaning::Right => self.balance_leaning.right += 1,
                            BalanceLeaning::Both => self.balance_leaning.both += 1,
                        }
                    }
                }
                self.time_of_day.add(ev.occurred_at, parts);
                self.symmetry.extend(ev.symmetry);
            }
            RepKind::Lift => {
                let cb = &mut self.canband;
                match ev.rep_type {
                    RepType::Single => cb.singles += 1,
                    RepType::Double => {
                        cb.doubles += 1;
                        cb.double_times.push(TimedDuration { duration_s: ev.duration_s, ts: ev.occurred_at });
                        if let Some(m) = ev.lift_metrics {
                            cb.distances_m.push(m.distance_m);
                        }
                    }
                }
                if let Some(m) = ev.lift_metrics {
                    cb.grip_avg_n.push(m.grip_avg_n);
                    cb.grip_peak_n.push(m.grip_peak_n);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QualityMetrics {
    pub symmetry_index: Vec<f64>,
    /// Population coefficient of variation of double durations; needs D >= 2.
    pub consistency_cv: Option<f64>,
    pub mean_double_time_s: Option<f64>,
}

impl QualityMetrics {
    pub fn of(day: &DailyMetrics) -> Self {
        let times: Vec<f64> = day.double_times.iter().map(|t| t.duration_s).collect();
        let mean = mean(&times);
        let cv = match mean {
            Some(m) if times.len() >= 2 && m > 0.0 => {
                let var = times.iter().map(|t| (t - m).powi(2)).sum::<f64>() / times.len() as f64;
                Some(var.sqrt() / m)
            }
            _ => None,
        };
        Self { symmetry_index: day.symmetry.clone(), consistency_cv: cv, mean_double_time_s: mean }
    }
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// `1 - |L - R| / (L + R)`; absent when both loads are zero.
pub fn symmetry_index(left: f64, right: f64) -> Option<f64> {
    let total = left + right;
    if !(total > 0.0) {
        return None;
    }
    Some((1.0 - (left - right).abs() / total).clamp(0.0, 1.0))
}
