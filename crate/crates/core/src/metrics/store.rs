use super::{DailyMetrics, DayParts, QualityMetrics, RepetitionEvent};
use crate::detect::{RepKind, RepType};
use chrono::{Days, NaiveDate};
use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const EVENT_LOG_FILE: &str = "events.jsonl";
pub const AGGREGATE_FILE: &str = "aggregates.json";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("event log write failed: {0}")]
    Write(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("event log line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("event log line {line}: {reason}")]
    Invalid { line: usize, reason: String },
}

enum LogSink {
    File(File),
    Memory(Vec<u8>),
    Custom(Box<dyn Write + Send>),
}

impl LogSink {
    fn append(&mut self, line: &[u8]) -> io::Result<()> {
        match self {
            LogSink::File(f) => {
                f.write_all(line)?;
                f.flush()
            }
            LogSink::Memory(buf) => {
                buf.extend_from_slice(line);
                Ok(())
            }
            LogSink::Custom(w) => {
                w.write_all(line)?;
                w.flush()
            }
        }
    }
}

/// Local store of repetition events and their daily aggregates. Single writer.
pub struct MetricsStore {
    dir: Option<PathBuf>,
    sink: LogSink,
    days: BTreeMap<NaiveDate, DailyMetrics>,
    parts: DayParts,
    checkpoint_every: usize,
    since_checkpoint: usize,
}

impl std::fmt::Debug for MetricsStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricsStore").field("dir", &self.dir).field("days", &self.days.len()).finish()
    }
}

impl MetricsStore {
    /// Opens (or creates) a store directory, rebuilding aggregates from the log.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::open_with(dir, DayParts::default())
    }

    pub fn open_with(dir: impl AsRef<Path>, parts: DayParts) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let log_path = dir.join(EVENT_LOG_FILE);
        let mut store = if log_path.exists() {
            Self::replay_with(BufReader::new(File::open(&log_path)?), parts)?
        } else {
            Self::in_memory().with_day_parts(parts)
        };
        store.dir = Some(dir);
        store.sink = LogSink::File(OpenOptions::new().create(true).append(true).open(&log_path)?);
        Ok(store)
    }

    pub fn in_memory() -> Self {
        Self {
            dir: None,
            sink: LogSink::Memory(Vec::new()),
            days: BTreeMap::new(),
            parts: DayParts::default(),
            checkpoint_every: 16,
            since_checkpoint: 0,
        }
    }

    /// Store whose log goes to an arbitrary writer.
    pub fn with_writer(writer: Box<dyn Write + Send>) -> Self {
        Self { sink: LogSink::Custom(writer), ..Self::in_memory() }
    }

    pub fn with_day_parts(mut self, parts: DayParts) -> Self {
        self.parts = parts;
        self
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Rebuilds aggregates from an event log.
    pub fn replay(reader: impl BufRead) -> Result<Self, StoreError> {
        Self::replay_with(reader, DayParts::default())
    }

    pub fn replay_with(reader: impl BufRead, parts: DayParts) -> Result<Self, StoreError> {
        let mut store = Self::in_memory().with_day_parts(parts);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let ev: RepetitionEvent =
                serde_json::from_str(&line).map_err(|source| StoreError::Parse { line: i + 1, source })?;
            ev.validate().map_err(|reason| StoreError::Invalid { line: i + 1, reason })?;
            store.apply(&ev);
            if let LogSink::Memory(buf) = &mut store.sink {
                buf.extend_from_slice(line.as_bytes());
                buf.push(b'\n');
            }
        }
        Ok(store)
    }

    pub fn replay_file(path: impl AsRef<Path>, parts: DayParts) -> Result<Self, StoreError> {
        Self::replay_with(BufReader::new(File::open(path)?), parts)
    }

    fn apply(&mut self, ev: &RepetitionEvent) {
        let date = ev.date();
        self.days.entry(date).or_insert_with(|| DailyMetrics::empty(date)).apply(ev, self.parts);
    }

    /// Appends the event to the log, then updates the day's aggregate.
    /// On a write failure the aggregates are left untouched.
    pub fn ingest_event(&mut self, ev: &RepetitionEvent) -> Result<&DailyMetrics, IngestError> {
        ev.validate().map_err(IngestError::InvalidEvent)?;
        let mut line = serde_json::to_vec(ev).map_err(|e| IngestError::InvalidEvent(e.to_string()))?;
        line.push(b'\n');
        self.sink.append(&line)?;
        self.apply(ev);
        self.since_checkpoint += 1;
        if self.since_checkpoint >= self.checkpoint_every {
            // the log already holds the event; a failed checkpoint is recovered by replay
            let _ = self.checkpoint();
        }
        Ok(&self.days[&ev.date()])
    }

    /// Writes `aggregates.json` atomically (temp file + rename).
    pub fn checkpoint(&mut self) -> io::Result<()> {
        self.since_checkpoint = 0;
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let tmp = dir.join(format!("{AGGREGATE_FILE}.tmp"));
        fs::write(&tmp, self.aggregates_json())?;
        fs::rename(tmp, dir.join(AGGREGATE_FILE))
    }

    /// Deterministic serialization of every day's aggregate.
    pub fn aggregates_json(&self) -> String {
        let keyed: BTreeMap<String, &DailyMetrics> = self.days.iter().map(|(d, m)| (d.to_string(), m)).collect();
        let mut s = serde_json::to_string_pretty(&keyed).expect("aggregates serialize");
        s.push('\n');
        s
    }

    /// Log contents for an in-memory store.
    pub fn memory_log(&self) -> Option<&[u8]> {
        match &self.sink {
            LogSink::Memory(buf) => Some(buf),
            _ => None,
        }
    }

    pub fn day(&self, date: NaiveDate) -> Option<&DailyMetrics> {
        self.days.get(&date)
    }

    pub fn days(&self) -> impl Iterator<Item = &DailyMetrics> {
        self.days.values()
    }

    pub fn first_day(&self) -> Option<NaiveDate> {
        self.days.keys().next().copied()
    }

    pub fn daily_summary(&self, date: NaiveDate) -> (DailyMetrics, QualityMetrics) {
        let day = self.days.get(&date).cloned().unwrap_or_else(|| DailyMetrics::empty(date));
        let q = QualityMetrics::of(&day);
        (day, q)
    }

    /// Sit-to-stand doubles for the seven days ending at `end_date`, oldest first.
    pub fn weekly_window(&self, end_date: NaiveDate) -> [u32; 7] {
        let mut out = [0; 7];
        for (i, slot) in out.iter_mut().enumerate() {
            let day = end_date - Days::new(6 - i as u64);
            *slot = self.days.get(&day).map_or(0, |d| d.doubles);
        }
        out
    }

    /// Count of events of one kind/type on a day.
    pub fn count(&self, date: NaiveDate, kind: RepKind, rep: RepType) -> u32 {
        self.days.get(&date).map_or(0, |d| match (kind, rep) {
            (RepKind::SitToStand, RepType::Single) => d.singles,
            (RepKind::SitToStand, RepType::Double) => d.doubles,
            (RepKind::Lift, RepType::Single) => d.canband.singles,
            (RepKind::Lift, RepType::Double) => d.canband.doubles,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{BalanceLeaning, LiftMetrics};
    use chrono::NaiveDateTime;

    fn ts(day: u32, h: u32, m: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2026, 3, day).unwrap().and_hms_opt(h, m, 0).unwrap()
    }

    fn sts(at: NaiveDateTime, rep: RepType, dur: f64) -> RepetitionEvent {
        RepetitionEvent {
            occurred_at: at,
            kind: RepKind::SitToStand,
            rep_type: rep,
            duration_s: dur,
            sensor_signature: "seat:0+mat:0".into(),
            balance_leaning: Some(BalanceLeaning::None),
            lift_metrics: None,
            symmetry: Some(0.95),
        }
    }

    #[test]
    fn single_then_double() {
        let mut s = MetricsStore::in_memory();
        let d = s.ingest_event(&sts(ts(2, 9, 0), RepType::Single, 7.0)).unwrap();
        assert_eq!((d.singles, d.doubles, d.double_times.len()), (1, 0, 0));
        let d = s.ingest_event(&sts(ts(2, 10, 0), RepType::Double, 6.2)).unwrap().clone();
        assert_eq!(d.doubles, 1);
        assert_eq!(d.double_times[0].duration_s, 6.2);
        assert_eq!(d.double_times[0].ts, ts(2, 10, 0));
        assert_eq!(d.time_of_day.total(), d.singles + d.doubles);
    }

    #[test]
    fn lift_metrics_go_to_canband() {
        let mut s = MetricsStore::in_memory();
        let ev = RepetitionEvent {
            occurred_at: ts(2, 19, 0),
            kind: RepKind::Lift,
            rep_type: RepType::Double,
            duration_s: 9.0,
            sensor_signature: "canband:0".into(),
            balance_leaning: None,
            lift_metrics: Some(LiftMetrics { distance_m: 0.4, grip_avg_n: 18.0, grip_peak_n: 23.0 }),
            symmetry: None,
        };
        let d = s.ingest_event(&ev).unwrap();
        assert_eq!(d.canband.doubles, 1);
        assert_eq!(d.canband.distances_m, vec![0.4]);
        assert_eq!(d.doubles, 0);
        assert_eq!(d.time_of_day.total(), 0);
    }

    #[test]
    fn replay_matches_live() {
        let mut live = MetricsStore::in_memory();
        for (i, rep) in [RepType::Single, RepType::Double, RepType::Double].into_iter().enumerate() {
            live.ingest_event(&sts(ts(2 + i as u32, 8 + 5 * i as u32, 13), rep, 5.0 + 0.37 * i as f64)).unwrap();
        }
        let replayed = MetricsStore::replay(live.memory_log().unwrap()).unwrap();
        assert_eq!(replayed.aggregates_json(), live.aggregates_json());
    }

    #[test]
    fn weekly_window_with_gaps() {
        let mut s = MetricsStore::in_memory();
        for day in [3, 6] {
            for _ in 0..3 {
                s.ingest_event(&sts(ts(day, 9, 0), RepType::Double, 6.0)).unwrap();
            }
        }
        assert_eq!(s.weekly_window(NaiveDate::from_ymd_opt(2026, 3, 8).unwrap()), [0, 3, 0, 0, 3, 0, 0]);
        assert_eq!(MetricsStore::in_memory().weekly_window(NaiveDate::from_ymd_opt(2026, 3, 8).unwrap()), [0; 7]);
    }

    struct Failing;
    impl Write for Failing {
        fn write(&mut self, _: &[u8]) -> io::Result<usize> {
            Err(io::Error::other("disk full"))
        }
        fn flush(&mut self) -> io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn write_failure_leaves_aggregates() {
        let mut s = MetricsStore::with_writer(Box::new(Failing));
        let before = s.aggregates_json();
        assert!(matches!(s.ingest_event(&sts(ts(2, 9, 0), RepType::Single, 7.0)), Err(IngestError::Write(_))));
        assert_eq!(s.aggregates_json(), before);
    }

    #[test]
    fn invalid_event_rejected() {
        let mut s = MetricsStore::in_memory();
        let mut ev = sts(ts(2, 9, 0), RepType::Single, 7.0);
        ev.balance_leaning = None;
        assert!(matches!(s.ingest_event(&ev), Err(IngestError::InvalidEvent(_))));
    }

    #[test]
    fn reopen_rebuilds_from_log() {
        let dir = tempfile::tempdir().unwrap();
        let json = {
            let mut s = MetricsStore::open(dir.path()).unwrap();
            s.ingest_event(&sts(ts(2, 9, 0), RepType::Double, 6.5)).unwrap();
            s.checkpoint().unwrap();
            s.aggregates_json()
        };
        assert_eq!(fs::read_to_string(dir.path().join(AGGREGATE_FILE)).unwrap(), json);
        let reopened = MetricsStore::open(dir.path()).unwrap();
        assert_eq!(reopened.aggregates_json(), json);
    }
}
