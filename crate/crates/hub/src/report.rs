//! Weekly report for a store directory.

use homesense_core::hub::{HubConfig, GOAL_FILE};
use homesense_core::metrics::{MetricsStore, WeeklySummary};
use homesense_core::progression::GoalState;
use chrono::NaiveDate;
use std::path::Path;

/// Current goal saved next to the store, or the configured initial goal.
pub fn stored_goal(store_dir: &Path, config: &HubConfig) -> Result<u32, String> {
    let path = store_dir.join(GOAL_FILE);
    if !path.exists() {
        return Ok(GoalState::new(&config.progression).goal);
    }
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let goal: GoalState = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(goal.goal)
}

pub fn weekly_summary(store: &MetricsStore, week_start: NaiveDate, goal: u32, config: &HubConfig) -> WeeklySummary {
    WeeklySummary::build(store, week_start, goal, config.progression.comparator)
}

/// Reads a store directory without modifying it.
pub fn load_store(store_dir: &Path, config: &HubConfig) -> Result<MetricsStore, String> {
    if !store_dir.is_dir() {
        return Err(format!("{}: no such store directory", store_dir.display()));
    }
    let log = store_dir.join(homesense_core::metrics::EVENT_LOG_FILE);
    if !log.exists() {
        return Ok(MetricsStore::in_memory().with_day_parts(config.day_parts));
    }
    MetricsStore::replay_file(&log, config.day_parts).map_err(|e| format!("{}: {e}", log.display()))
}

pub fn report(store_dir: &Path, week_start: NaiveDate, config: &HubConfig) -> Result<String, String> {
    let store = load_store(store_dir, config)?;
    let goal = stored_goal(store_dir, config)?;
    Ok(weekly_summary(&store, week_start, goal, config).render_table())
}
