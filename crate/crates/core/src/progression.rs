//! Weekly goal evaluation and goal prompts.
//!
//! Every seven days the last week's double counts are compared with the
//! daily target `G`. `N` counts the days that met it; `N >= 3` offers the
//! user a higher goal, otherwise a motivational message is shown. `G` only
//! changes when the user accepts an offer.

use crate::metrics::{mean, DailyMetrics};
use chrono::{Days, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PROMPT_THRESHOLD: u32 = 3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    /// `D_i >= G`
    #[default]
    AtLeast,
    /// `D_i > G`
    Exceeds,
}

impl Comparator {
    pub fn met(self, doubles: u32, goal: u32) -> bool {
        match self {
            Comparator::AtLeast => doubles >= goal,
            Comparator::Exceeds => doubles > goal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProgressionConfig {
    pub initial_goal: u32,
    pub step: u32,
    pub comparator: Comparator,
    /// `{n}` is replaced by the number of days the goal was met.
    pub increase_template: String,
    pub motivation_template: String,
}

impl Default for ProgressionConfig {
    fn default() -> Self {
        Self {
            initial_goal: 1,
            step: 1,
            comparator: Comparator::AtLeast,
            increase_template: "Great job! You've exceeded your daily goal {n} times this week. \
                                Would you like to set a higher goal for next week?"
                .into(),
            motivation_template: "You reached your daily goal {n} times this week. \
                                  Every double counts, keep it up!"
                .into(),
        }
    }
}

impl ProgressionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.initial_goal < 1 {
            return Err("initial_goal must be at least 1".into());
        }
        if self.step < 1 {
            return Err("step must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    IncreaseOffer,
    Motivation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Pending,
    Accepted,
    Declined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accepted,
    Declined,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub kind: PromptKind,
    #[serde(rename = "n")]
    pub days_met: u32,
    pub issued_at: Option<NaiveDateTime>,
    pub resolution: Resolution,
}

impl PromptRecord {
    pub fn text(&self, config: &ProgressionConfig) -> String {
        let template = match self.kind {
            PromptKind::IncreaseOffer => &config.increase_template,
            PromptKind::Motivation => &config.motivation_template,
        };
        template.replace("{n}", &self.days_met.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalState {
    #[serde(rename = "g")]
    pub goal: u32,
    pub step: u32,
    pub pending_prompt: Option<PromptRecord>,
    /// Last day of the current 7-day evaluation window.
    pub week_anchor: Option<NaiveDate>,
}

impl GoalState {
    pub fn new(config: &ProgressionConfig) -> Self {
        Self { goal: config.initial_goal.max(1), step: config.step.max(1), pending_prompt: None, week_anchor: None }
    }

    /// Sets the first window to end six days after the first activity day.
    pub fn anchor_from(&mut self, first_activity: NaiveDate) {
        if self.week_anchor.is_none() {
            self.week_anchor = Some(first_activity + Days::new(6));
        }
    }

    /// Window end dates that are complete as of `today`, advancing the anchor.
    pub fn due_windows(&mut self, today: NaiveDate) -> Vec<NaiveDate> {
        let mut due = Vec::new();
        while let Some(anchor) = self.week_anchor {
            if today <= anchor {
                break;
            }
            due.push(anchor);
            self.week_anchor = Some(anchor + Days::new(7));
        }
        due
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgressionError {
    #[error("no pending goal increase offer")]
    StateError,
    #[error("requested goal {requested} must be greater than the current goal {current}")]
    ValueError { requested: u32, current: u32 },
}

/// Counts the days meeting the goal and picks the prompt. Pure; never changes `G`.
pub fn weekly_goal_check(goal: u32, doubles: &[u32; 7], comparator: Comparator) -> (u32, PromptRecord) {
    let n = doubles.iter().filter(|&&d| comparator.met(d, goal)).count() as u32;
    let kind = if n >= PROMPT_THRESHOLD { PromptKind::IncreaseOffer } else { PromptKind::Motivation };
    (n, PromptRecord { kind, days_met: n, issued_at: None, resolution: Resolution::Pending })
}

/// Resolves the pending increase offer.
pub fn accept_prompt(
    state: &GoalState,
    decision: Decision,
    user_value: Option<u32>,
) -> Result<GoalState, ProgressionError> {
    let Some(prompt) = state
        .pending_prompt
        .as_ref()
        .filter(|p| p.kind == PromptKind::IncreaseOffer && p.resolution == Resolution::Pending)
    else {
        return Err(ProgressionError::StateError);
    };
    let mut next = state.clone();
    let mut resolved = prompt.clone();
    match decision {
        Decision::Accepted => {
            next.goal = match user_value {
                Some(v) if v <= state.goal => {
                    return Err(ProgressionError::ValueError { requested: v, current: state.goal })
                }
                Some(v) => v,
                None => state.goal.saturating_add(state.step),
            };
            resolved.resolution = Resolution::Accepted;
        }
        Decision::Declined => resolved.resolution = Resolution::Declined,
    }
    next.pending_prompt = Some(resolved);
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftRow {
    pub rep_type: String,
    pub duration_s: f64,
    pub distance_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackBundle {
    pub date: NaiveDate,
    pub mean_double_time_s: Option<f64>,
    pub doubles: u32,
    pub goal: u32,
    /// `doubles / goal`, for a progress bar.
    pub progress: f64,
    pub singles: u32,
    pub canband_singles: u32,
    pub canband_doubles: u32,
    pub canband_rows: Vec<LiftRow>,
}

pub fn feedback_summary(day: &DailyMetrics, goal: u32) -> FeedbackBundle {
    let times: Vec<f64> = day.double_times.iter().map(|t| t.duration_s).collect();
    let cb = &day.canband;
    let canband_rows = cb
        .double_times
        .iter()
        .enumerate()
        .map(|(i, t)| LiftRow { rep_type: "double".into(), duration_s: t.duration_s, distance_m: cb.distances_m.get(i).copied() })
        .collect();
    FeedbackBundle {
        date: day.date,
        mean_double_time_s: mean(&times),
        doubles: day.doubles,
        goal,
        progress: day.doubles as f64 / goal.max(1) as f64,
        singles: day.singles,
        canband_singles: cb.singles,
        canband_doubles: cb.doubles,
        canband_rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::TimedDuration;
    use proptest::prelude::*;

    fn offer(n: u32) -> PromptRecord {
        PromptRecord { kind: PromptKind::IncreaseOffer, days_met: n, issued_at: None, resolution: Resolution::Pending }
    }

    fn state(goal: u32) -> GoalState {
        GoalState { goal, step: 1, pending_prompt: Some(offer(3)), week_anchor: None }
    }

    #[test]
    fn three_days_met_offers_increase() {
        let (n, p) = weekly_goal_check(3, &[3, 3, 3, 0, 0, 0, 0], Comparator::AtLeast);
        assert_eq!((n, p.kind), (3, PromptKind::IncreaseOffer));
    }

    #[test]
    fn two_days_met_is_motivation() {
        let (n, p) = weekly_goal_check(3, &[4, 4, 0, 0, 0, 0, 0], Comparator::AtLeast);
        assert_eq!((n, p.kind), (2, PromptKind::Motivation));
    }

    #[test]
    fn strict_comparator() {
        let (n, _) = weekly_goal_check(3, &[3, 3, 3, 4, 0, 0, 0], Comparator::Exceeds);
        assert_eq!(n, 1);
    }

    #[test]
    fn accept_and_decline() {
        assert_eq!(accept_prompt(&state(3), Decision::Accepted, None).unwrap().goal, 4);
        assert_eq!(accept_prompt(&state(3), Decision::Declined, None).unwrap().goal, 3);
        assert_eq!(accept_prompt(&state(3), Decision::Accepted, Some(6)).unwrap().goal, 6);
        let resolved = accept_prompt(&state(3), Decision::Declined, None).unwrap();
        assert_eq!(resolved.pending_prompt.unwrap().resolution, Resolution::Declined);
    }

    #[test]
    fn accept_errors() {
        let mut s = state(3);
        assert_eq!(
            accept_prompt(&s, Decision::Accepted, Some(3)),
            Err(ProgressionError::ValueError { requested: 3, current: 3 })
        );
        s.pending_prompt = None;
        assert_eq!(accept_prompt(&s, Decision::Accepted, None), Err(ProgressionError::StateError));
        s.pending_prompt = Some(PromptRecord { kind: PromptKind::Motivation, ..offer(1) });
        assert_eq!(accept_prompt(&s, Decision::Declined, None), Err(ProgressionError::StateError));
        let done = accept_prompt(&state(3), Decision::Accepted, None).unwrap();
        assert_eq!(accept_prompt(&done, Decision::Accepted, None), Err(ProgressionError::StateError));
    }

    #[test]
    fn prompt_text() {
        let cfg = ProgressionConfig::default();
        assert!(offer(3).text(&cfg).starts_with("Great job! You've exceeded your daily goal 3 times this week."));
    }

    #[test]
    fn windows_roll_weekly() {
        let d = |day| NaiveDate::from_ymd_opt(2026, 3, day).unwrap();
        let mut s = GoalState::new(&ProgressionConfig::default());
        assert!(s.due_windows(d(20)).is_empty());
        s.anchor_from(d(2));
        assert!(s.due_windows(d(8)).is_empty());
        assert_eq!(s.due_windows(d(9)), vec![d(8)]);
        assert_eq!(s.due_windows(d(23)), vec![d(15), d(22)]);
        assert_eq!(s.week_anchor, Some(d(29)));
    }

    #[test]
    fn feedback_examples() {
        let date = NaiveDate::from_ymd_opt(2026, 3, 2).unwrap();
        let ts = date.and_hms_opt(9, 0, 0).unwrap();
        let mut day = DailyMetrics::empty(date);
        day.doubles = 2;
        day.double_times = vec![TimedDuration { duration_s: 5.0, ts }, TimedDuration { duration_s: 7.0, ts }];
        let b = feedback_summary(&day, 3);
        assert_eq!(b.mean_double_time_s, Some(6.0));
        assert_eq!((b.doubles, b.goal), (2, 3));
    }

    proptest! {
        #[test]
        fn goal_never_decreases(goal in 1u32..50, accept in any::<bool>(), user in proptest::option::of(0u32..80)) {
            let decision = if accept { Decision::Accepted } else { Decision::Declined };
            if let Ok(next) = accept_prompt(&state(goal), decision, user) {
                prop_assert!(next.goal >= goal);
            }
        }

        #[test]
        fn durations_do_not_affect_check(goal in 1u32..6, d in proptest::array::uniform7(0u32..6),
                                         times in proptest::collection::vec(0.5f64..30.0, 0..6)) {
            let date = NaiveDate::from_ymd_opt(2026, 3, 2).unwrap();
            let mut day = DailyMetrics::empty(date);
            day.double_times = times.iter().map(|&t| TimedDuration { duration_s: t, ts: date.and_hms_opt(9, 0, 0).unwrap() }).collect();
            let _ = feedback_summary(&day, goal);
            prop_assert_eq!(weekly_goal_check(goal, &d, Comparator::AtLeast), weekly_goal_check(goal, &d, Comparator::AtLeast));
        }
    }
}
