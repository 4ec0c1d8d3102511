use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::engine::{ActionResult, EventBody, LogRecord, ScenarioRef};
use crate::scenario::{ActionId, StateId, TerminalOutcome};

use super::AnalyticsError;

/// Points deducted per action that did not advance the current goal.
pub const OFF_GOAL_PENALTY: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitKind {
    Goal,
    Timeout,
    Effect,
    SessionEnd,
}

/// One stay in one state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVisit {
    pub state_id: StateId,
    pub entered_at_ms: u64,
    pub exited_by: ExitKind,
    pub time_to_goal_ms: Option<u64>,
    pub off_goal_action_count: u64,
    pub wrong_action_ids: Vec<ActionId>,
    /// Goal actions of the state at the time it was entered (empty if none).
    pub goal_action_ids: Vec<ActionId>,
    /// The learner performed at least one of this state's goal actions at
    /// some point during the session.
    pub knew_goal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub learner_id: String,
    pub cohort_id: String,
    pub scenario: ScenarioRef,
    pub started_at: Option<DateTime<Utc>>,
    pub outcome: TerminalOutcome,
    pub total_ms: u64,
    pub states: Vec<StateVisit>,
    pub goals_hit: u64,
    pub goals_possible: u64,
    pub off_goal_action_count: u64,
    /// Goal actions of a timed-out state that the learner never performed
    /// anywhere in the session.
    pub missed_goal_actions: Vec<ActionId>,
    pub score: f64,
}

/// `100 × hit/possible − 5 × off_goal`, clamped to `[0, 100]`. With no goal
/// opportunities the goal term is 100.
pub fn score(goals_hit: u64, goals_possible: u64, off_goal: u64) -> f64 {
    let base = if goals_possible == 0 {
        100.0
    } else {
        100.0 * goals_hit as f64 / goals_possible as f64
    };
    (base - OFF_GOAL_PENALTY * off_goal as f64).clamp(0.0, 100.0)
}

fn corrupt(line: usize, why: impl Into<String>) -> AnalyticsError {
    AnalyticsError::CorruptLog { index: line, reason: why.into() }
}

/// Rebuilds a session's per-state history from its event log.
pub fn summarize_session(
    records: &[LogRecord],
    cohort_id: &str,
) -> Result<SessionSummary, AnalyticsError> {
    let first = records.first().ok_or(AnalyticsError::IncompleteLog)?;
    let (learner_id, checksum, started_at) = match first.event() {
        Ok(ev) if ev.t_ms == 0 => match ev.body {
            EventBody::SessionStart { learner_id, scenario_checksum, started_at } => {
                (learner_id, scenario_checksum, started_at)
            }
            _ => return Err(corrupt(0, "log must begin with session_start")),
        },
        Ok(_) => return Err(corrupt(0, "session_start must be at t=0")),
        Err(e) => return Err(corrupt(0, e.to_string())),
    };
    let scenario = ScenarioRef {
        id: first.scenario_id.clone(),
        version: first.scenario_version,
        checksum,
    };

    let mut visits: Vec<StateVisit> = Vec::new();
    let mut open = false;
    let mut performed: BTreeSet<ActionId> = BTreeSet::new();
    let mut end: Option<(u64, TerminalOutcome)> = None;
    let mut prev_t = 0;
    // The event that may legitimately precede a state_entered at the same t.
    let mut cause_pending = true;
    let mut goal_pending = false;

    for (i, rec) in records.iter().enumerate().skip(1) {
        if rec.session_id != first.session_id
            || rec.scenario_id != first.scenario_id
            || rec.scenario_version != first.scenario_version
        {
            return Err(corrupt(i, "record belongs to another session or scenario"));
        }
        if rec.t_ms < prev_t {
            return Err(corrupt(i, "timestamps go backwards"));
        }
        if end.is_some() {
            return Err(corrupt(i, "event after session_end"));
        }
        let same_instant = rec.t_ms == prev_t;
        prev_t = rec.t_ms;
        let ev = rec.event().map_err(|e| corrupt(i, e.to_string()))?;
        let was_cause = std::mem::replace(&mut cause_pending, false) && same_instant;
        let expected_goal = std::mem::replace(&mut goal_pending, false);
        if expected_goal && !matches!(ev.body, EventBody::GoalAchieved { .. }) {
            return Err(corrupt(i, "goal action not followed by goal_achieved"));
        }

        match ev.body {
            EventBody::SessionStart { .. } => return Err(corrupt(i, "duplicate session_start")),
            EventBody::StateEntered { state_id, goal, .. } => {
                if !was_cause || open {
                    return Err(corrupt(i, "state_entered without a preceding cause"));
                }
                visits.push(StateVisit {
                    state_id,
                    entered_at_ms: rec.t_ms,
                    exited_by: ExitKind::SessionEnd,
                    time_to_goal_ms: None,
                    off_goal_action_count: 0,
                    wrong_action_ids: Vec::new(),
                    goal_action_ids: goal.map(|g| g.action_ids.into_iter().collect()).unwrap_or_default(),
                    knew_goal: false,
                });
                open = true;
            }
            EventBody::ActionPerformed { action_id, state_id, result } => {
                let visit = match visits.last_mut() {
                    Some(v) if open && v.state_id == state_id => v,
                    _ => return Err(corrupt(i, "action_performed outside its state")),
                };
                performed.insert(action_id.clone());
                if !result.is_on_goal() {
                    visit.off_goal_action_count += 1;
                    visit.wrong_action_ids.push(action_id);
                }
                match result {
                    ActionResult::Goal => goal_pending = true,
                    ActionResult::Transition => {
                        visit.exited_by = ExitKind::Effect;
                        open = false;
                        cause_pending = true;
                    }
                    _ => {}
                }
            }
            EventBody::GoalAchieved { state_id, .. } => {
                let visit = match visits.last_mut() {
                    Some(v) if open && v.state_id == state_id && expected_goal && same_instant => v,
                    _ => return Err(corrupt(i, "goal_achieved without its goal action")),
                };
                visit.exited_by = ExitKind::Goal;
                visit.time_to_goal_ms = Some(rec.t_ms - visit.entered_at_ms);
                open = false;
                cause_pending = true;
            }
            EventBody::TimeoutDeterioration { state_id } => {
                let visit = match visits.last_mut() {
                    Some(v) if open && v.state_id == state_id => v,
                    _ => return Err(corrupt(i, "timeout outside its state")),
                };
                visit.exited_by = ExitKind::Timeout;
                open = false;
                cause_pending = true;
            }
            EventBody::SessionEnd { outcome, .. } => {
                if !open {
                    return Err(corrupt(i, "session_end while no state is active"));
                }
                open = false;
                end = Some((rec.t_ms, outcome));
            }
        }
    }
    if goal_pending {
        return Err(corrupt(records.len(), "goal action not followed by goal_achieved"));
    }
    let (total_ms, outcome) = end.ok_or(AnalyticsError::IncompleteLog)?;

    let mut missed = BTreeSet::new();
    for v in &mut visits {
        v.knew_goal = v.goal_action_ids.iter().any(|a| performed.contains(a));
        if v.exited_by == ExitKind::Timeout {
            missed.extend(v.goal_action_ids.iter().filter(|a| !performed.contains(*a)).cloned());
        }
    }
    let goals_possible = visits.iter().filter(|v| !v.goal_action_ids.is_empty()).count() as u64;
    let goals_hit = visits.iter().filter(|v| v.exited_by == ExitKind::Goal).count() as u64;
    let off_goal: u64 = visits.iter().map(|v| v.off_goal_action_count).sum();

    Ok(SessionSummary {
        session_id: first.session_id.clone(),
        learner_id,
        cohort_id: cohort_id.to_owned(),
        scenario,
        started_at,
        outcome,
        total_ms,
        states: visits,
        goals_hit,
        goals_possible,
        off_goal_action_count: off_goal,
        missed_goal_actions: missed.into_iter().collect(),
        score: score(goals_hit, goals_possible, off_goal),
    })
}
