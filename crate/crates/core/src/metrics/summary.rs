//! Weekly summary: the table the touchscreen shows and `homesense report` prints.

use super::{mean, MetricsStore, QualityMetrics};
use crate::progression::Comparator;
use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRow {
    pub date: NaiveDate,
    pub doubles: u32,
    pub singles: u32,
    pub mean_double_s: Option<f64>,
    pub consistency_cv: Option<f64>,
    pub leaning: u32,
    pub met: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanBandRow {
    pub date: NaiveDate,
    pub singles: u32,
    pub doubles: u32,
    pub mean_double_s: Option<f64>,
    pub distance_m: Option<f64>,
    pub grip_avg_n: Option<f64>,
    pub grip_peak_n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklySummary {
    pub week_start: NaiveDate,
    pub goal: u32,
    pub days: Vec<DayRow>,
    pub canband: Vec<CanBandRow>,
    pub total_doubles: u32,
    pub total_singles: u32,
    /// Mean over every double performed in the week.
    pub mean_double_s: Option<f64>,
    /// Days meeting the goal.
    pub adherence: u32,
}

impl WeeklySummary {
    /// The seven days starting at `week_start`.
    pub fn build(store: &MetricsStore, week_start: NaiveDate, goal: u32, comparator: Comparator) -> Self {
        let mut days = Vec::with_capacity(7);
        let mut canband = Vec::with_capacity(7);
        let mut all_times = Vec::new();
        for i in 0..7 {
            let date = week_start + Days::new(i);
            let (d, q) = store.daily_summary(date);
            all_times.extend(d.double_times.iter().map(|t| t.duration_s));
            let QualityMetrics { consistency_cv, mean_double_time_s, .. } = q;
            let lean = d.balance_leaning;
            days.push(DayRow {
                date,
                doubles: d.doubles,
                singles: d.singles,
                mean_double_s: mean_double_time_s,
                consistency_cv,
                leaning: lean.left + lean.right + lean.both,
                met: comparator.met(d.doubles, goal),
            });
            let c = &d.canband;
            canband.push(CanBandRow {
                date,
                singles: c.singles,
                doubles: c.doubles,
                mean_double_s: mean(&c.double_times.iter().map(|t| t.duration_s).collect::<Vec<_>>()),
                distance_m: mean(&c.distances_m),
                grip_avg_n: mean(&c.grip_avg_n),
                grip_peak_n: c.grip_peak_n.iter().copied().reduce(f64::max),
            });
        }
        Self {
            week_start,
            goal,
            total_doubles: days.iter().map(|d| d.doubles).sum(),
            total_singles: days.iter().map(|d| d.singles).sum(),
            mean_double_s: mean(&all_times),
            adherence: days.iter().filter(|d| d.met).count() as u32,
            days,
            canband,
        }
    }

    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let end = self.week_start + Days::new(6);
        let _ = writeln!(s, "Week {} to {}  goal {} doubles/day", self.week_start, end, self.goal);
        let _ = writeln!(s, "{:<10}  {:>7}  {:>7}  {:>10}  {:>6}  {:>7}  {:>3}", "date", "doubles", "singles", "mean_dbl_s", "cv", "leaning", "met");
        for d in &self.days {
            let _ = writeln!(
                s,
                "{:<10}  {:>7}  {:>7}  {:>10}  {:>6}  {:>7}  {:>3}",
                d.date,
                d.doubles,
                d.singles,
                opt(d.mean_double_s, 2),
                opt(d.consistency_cv, 3),
                d.leaning,
                if d.met { "yes" } else { "no" }
            );
        }
        let _ = writeln!(
            s,
            "{:<10}  {:>7}  {:>7}  {:>10}  adherence {}/7",
            "total",
            self.total_doubles,
            self.total_singles,
            opt(self.mean_double_s, 2),
            self.adherence
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "Can Band");
        let _ = writeln!(s, "{:<10}  {:>7}  {:>7}  {:>10}  {:>10}  {:>10}  {:>11}", "date", "singles", "doubles", "mean_dbl_s", "distance_m", "grip_avg_n", "grip_peak_n");
        for c in &self.canband {
            let _ = writeln!(
                s,
                "{:<10}  {:>7}  {:>7}  {:>10}  {:>10}  {:>10}  {:>11}",
                c.date,
                c.singles,
                c.doubles,
                opt(c.mean_double_s, 2),
                opt(c.distance_m, 3),
                opt(c.grip_avg_n, 1),
                opt(c.grip_peak_n, 1)
            );
        }
        s
    }
}

fn opt(v: Option<f64>, places: usize) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.places$}"))
}
