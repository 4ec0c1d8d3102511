//! Deterministic execution of a scenario in virtual time.
//!
//! The engine never reads a clock. Callers pass integer milliseconds since
//! session start, and every state change is derived from those timestamps,
//! so the same inputs always yield the same event log.
//!
//! Timing rules:
//! * a state times out when elapsed-in-state reaches its effective duration;
//!   an action stamped exactly at that boundary is applied *after* the
//!   timeout, in the successor state;
//! * the session ends `timed_out` when `session_limit_ms` is reached in a
//!   non-terminal state; timeouts falling exactly on the limit still fire
//!   first;
//! * entering a terminal state ends the session with that state's outcome.

mod event;
mod script;

use std::collections::BTreeSet;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::scenario::{
    checksum, validate, ActionId, GoalMode, Representation, Scenario, ScenarioId, StateId,
    StateNode, TerminalOutcome, ValidationReport, VitalSignSet,
};

pub use event::{
    read_jsonl, write_jsonl, ActionResult, EndReason, EventBody, EventKind, LogError, LogRecord,
    SessionEvent,
};
pub use script::{ActionScript, ScriptError, ScriptStep};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("scenario has {} validation error(s)", .0.errors.len())]
    InvalidScenario(ValidationReport),
    #[error("time reversal: requested {requested} ms but session is at {now} ms")]
    TimeReversal { now: u64, requested: u64 },
    #[error("session has ended")]
    SessionEnded,
    #[error("unknown action {0}")]
    UnknownAction(ActionId),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScenarioRef {
    pub id: ScenarioId,
    pub version: u64,
    pub checksum: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Running,
    Ended,
}

/// Who is playing and under which session id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionInfo {
    pub session_id: String,
    pub learner_id: String,
    /// Wall-clock start, recorded in `session_start` for ordering attempts.
    pub started_at: Option<DateTime<Utc>>,
}

impl SessionInfo {
    pub fn new(session_id: impl Into<String>, learner_id: impl Into<String>) -> Self {
        Self { session_id: session_id.into(), learner_id: learner_id.into(), started_at: None }
    }

    pub fn started_at(mut self, at: DateTime<Utc>) -> Self {
        self.started_at = Some(at);
        self
    }
}

/// What the client shows: the top-bar vitals, the patient representation and
/// the list of actions performed so far.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplayFrame {
    pub state_id: StateId,
    pub vitals: VitalSignSet,
    pub representation: Representation,
    pub elapsed_in_state_ms: u64,
    pub history: Vec<ActionId>,
    pub status: SessionStatus,
    pub outcome: Option<TerminalOutcome>,
}

/// One learner's play-through. Operations on a session must be serialized by
/// the caller; independent sessions share only the immutable scenario.
#[derive(Clone, Debug)]
pub struct Session {
    scenario: Arc<Scenario>,
    session_id: String,
    learner_id: String,
    scenario_ref: ScenarioRef,
    current_state: StateId,
    state_entered_at: u64,
    effective_duration_ms: u64,
    goals_satisfied: BTreeSet<ActionId>,
    now: u64,
    status: SessionStatus,
    outcome: Option<TerminalOutcome>,
    history: Vec<SessionEvent>,
    visit_seq: u64,
}

impl Session {
    /// Starts a session in the scenario's initial state at t = 0.
    pub fn start(scenario: Arc<Scenario>, info: SessionInfo) -> Result<Self, EngineError> {
        let report = validate(&scenario);
        if !report.is_deployable() {
            return Err(EngineError::InvalidScenario(report));
        }
        let scenario_ref = ScenarioRef {
            id: scenario.id.clone(),
            version: scenario.version.get(),
            checksum: checksum(&scenario),
        };
        let initial = scenario.initial_state.clone();
        let mut session = Session {
            scenario,
            session_id: info.session_id,
            learner_id: info.learner_id.clone(),
            current_state: initial.clone(),
            scenario_ref,
            state_entered_at: 0,
            effective_duration_ms: 0,
            goals_satisfied: BTreeSet::new(),
            now: 0,
            status: SessionStatus::Running,
            outcome: None,
            history: Vec::new(),
            visit_seq: 0,
        };
        session.push(
            0,
            EventBody::SessionStart {
                learner_id: info.learner_id,
                scenario_checksum: session.scenario_ref.checksum.clone(),
                started_at: info.started_at,
            },
        );
        session.enter(initial, 0);
        Ok(session)
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn learner_id(&self) -> &str {
        &self.learner_id
    }

    pub fn scenario_ref(&self) -> &ScenarioRef {
        &self.scenario_ref
    }

    pub fn current_state(&self) -> &StateId {
        &self.current_state
    }

    pub fn state_entered_at(&self) -> u64 {
        self.state_entered_at
    }

    /// Duration of the current state including applied `duration_delta_ms`
    /// effects. Zero in terminal states.
    pub fn effective_duration_ms(&self) -> u64 {
        self.effective_duration_ms
    }

    /// Number of `state_entered` events so far; changes on every transition,
    /// including re-entry into the same state.
    pub fn visit_seq(&self) -> u64 {
        self.visit_seq
    }

    pub fn goals_satisfied(&self) -> &BTreeSet<ActionId> {
        &self.goals_satisfied
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn is_running(&self) -> bool {
        self.status == SessionStatus::Running
    }

    pub fn outcome(&self) -> Option<TerminalOutcome> {
        self.outcome
    }

    pub fn history(&self) -> &[SessionEvent] {
        &self.history
    }

    /// The history as `.events.jsonl` records.
    pub fn records(&self) -> Vec<LogRecord> {
        self.history
            .iter()
            .map(|e| {
                LogRecord::new(&self.session_id, &self.scenario_ref.id, self.scenario_ref.version, e)
            })
            .collect()
    }

    fn node(&self) -> &StateNode {
        &self.scenario.states[&self.current_state]
    }

    fn push(&mut self, t_ms: u64, body: EventBody) {
        self.history.push(SessionEvent { t_ms, body });
    }

    fn enter(&mut self, state: StateId, t: u64) {
        let node = &self.scenario.states[&state];
        let (goal, terminal, duration) =
            (node.goal.clone(), node.terminal, node.duration_ms.map_or(0, |d| d.get()));
        self.push(t, EventBody::StateEntered { state_id: state.clone(), goal, terminal });
        self.current_state = state;
        self.state_entered_at = t;
        self.effective_duration_ms = duration;
        self.goals_satisfied.clear();
        self.visit_seq += 1;
        self.now = t;
        if let Some(outcome) = terminal {
            self.end(outcome, EndReason::TerminalState, t);
        }
    }

    fn end(&mut self, outcome: TerminalOutcome, reason: EndReason, t: u64) {
        self.push(t, EventBody::SessionEnd { outcome, reason });
        self.status = SessionStatus::Ended;
        self.outcome = Some(outcome);
        self.now = t;
    }

    fn check_time(&self, t_ms: u64) -> Result<(), EngineError> {
        if self.status == SessionStatus::Ended {
            return Err(EngineError::SessionEnded);
        }
        if t_ms < self.now {
            return Err(EngineError::TimeReversal { now: self.now, requested: t_ms });
        }
        Ok(())
    }

    /// Moves virtual time forward to `t_ms`, firing every timeout and the
    /// session limit on the way. Returns the events emitted by this call.
    pub fn advance_to(&mut self, t_ms: u64) -> Result<&[SessionEvent], EngineError> {
        self.check_time(t_ms)?;
        let mark = self.history.len();
        self.advance_inner(t_ms);
        Ok(&self.history[mark..])
    }

    fn advance_inner(&mut self, t_ms: u64) {
        let limit = self.scenario.session_limit_ms.get();
        while self.is_running() {
            let boundary = self.state_entered_at + self.effective_duration_ms;
            if boundary > t_ms || boundary > limit {
                break;
            }
            let from = self.current_state.clone();
            let next = self.node().on_timeout.clone().expect("validated non-terminal state has on_timeout");
            self.push(boundary, EventBody::TimeoutDeterioration { state_id: from });
            self.enter(next, boundary);
        }
        if self.is_running() {
            if t_ms >= limit {
                self.end(TerminalOutcome::TimedOut, EndReason::SessionLimit, limit);
            } else {
                self.now = t_ms;
            }
        }
    }

    /// Applies a learner action at `t_ms`, after first advancing to it.
    ///
    /// If advancing ends the session, the timeout events stay in the history
    /// and `SessionEnded` is returned.
    pub fn perform_action(
        &mut self,
        t_ms: u64,
        action: &ActionId,
    ) -> Result<&[SessionEvent], EngineError> {
        self.check_time(t_ms)?;
        if !self.scenario.actions.contains_key(action) {
            return Err(EngineError::UnknownAction(action.clone()));
        }
        let mark = self.history.len();
        self.advance_inner(t_ms);
        if !self.is_running() {
            return Err(EngineError::SessionEnded);
        }

        let scenario = Arc::clone(&self.scenario);
        let node = &scenario.states[&self.current_state];
        let state_id = self.current_state.clone();
        let result = match (&node.goal, node.effects.get(action)) {
            (Some(goal), _) if goal.action_ids.contains(action) => match goal.mode {
                GoalMode::Any => ActionResult::Goal,
                GoalMode::All => {
                    if !self.goals_satisfied.insert(action.clone()) {
                        ActionResult::None
                    } else if self.goals_satisfied.len() == goal.action_ids.len() {
                        ActionResult::Goal
                    } else {
                        ActionResult::GoalProgress
                    }
                }
            },
            (_, Some(effect)) if effect.transition.is_some() => ActionResult::Transition,
            (_, Some(_)) => ActionResult::DurationChange,
            _ => ActionResult::None,
        };
        self.push(
            t_ms,
            EventBody::ActionPerformed { action_id: action.clone(), state_id: state_id.clone(), result },
        );

        match result {
            ActionResult::Goal => {
                self.push(t_ms, EventBody::GoalAchieved { state_id, action_id: action.clone() });
                let next = node.on_goal.clone().expect("goal implies on_goal");
                self.enter(next, t_ms);
            }
            ActionResult::Transition => {
                let next = node.effects[action].transition.clone().expect("checked above");
                self.enter(next, t_ms);
            }
            ActionResult::DurationChange => {
                let delta = node.effects[action].duration_delta_ms.unwrap_or(0);
                let elapsed = t_ms - self.state_entered_at;
                let adjusted = self.effective_duration_ms as i128 + delta as i128;
                let floor = elapsed as i128 + 1;
                self.effective_duration_ms = adjusted.max(floor).min(u64::MAX as i128) as u64;
            }
            ActionResult::GoalProgress | ActionResult::None => {}
        }
        Ok(&self.history[mark..])
    }

    /// Advances to `t_ms` (when still running) and returns what the client
    /// should display.
    pub fn render_frame(&mut self, t_ms: u64) -> Result<DisplayFrame, EngineError> {
        if t_ms < self.now {
            return Err(EngineError::TimeReversal { now: self.now, requested: t_ms });
        }
        if self.is_running() {
            self.advance_inner(t_ms);
        }
        Ok(self.frame())
    }

    /// The frame at the session's current time, without advancing.
    pub fn frame(&self) -> DisplayFrame {
        let node = self.node();
        let elapsed = self.now - self.state_entered_at;
        DisplayFrame {
            state_id: self.current_state.clone(),
            vitals: vitals_at(node, elapsed, self.effective_duration_ms),
            representation: node.representation.clone(),
            elapsed_in_state_ms: elapsed,
            history: self
                .history
                .iter()
                .filter_map(|e| match &e.body {
                    EventBody::ActionPerformed { action_id, .. } => Some(action_id.clone()),
                    _ => None,
                })
                .collect(),
            status: self.status,
            outcome: self.outcome,
        }
    }
}

/// Vital signs of `state` after `elapsed_ms` in it: linear interpolation from
/// `vitals` toward `drift_to`, reaching it at `effective_duration_ms`.
/// Terminal states and states without `drift_to` keep their entry vitals.
pub fn vitals_at(state: &StateNode, elapsed_ms: u64, effective_duration_ms: u64) -> VitalSignSet {
    match &state.drift_to {
        Some(target) if !state.is_terminal() && effective_duration_ms > 0 => {
            let frac = elapsed_ms.min(effective_duration_ms) as f64 / effective_duration_ms as f64;
            state.vitals.map_values(|sign, from| {
                let to = target.get(sign).unwrap_or(from);
                from + (to - from) * frac
            })
        }
        _ => state.vitals.clone(),
    }
}

/// Runs `script` headlessly: start, then each action in order, then advance
/// to the script's final time (the session limit when absent). Actions that
/// fall after the session has ended are dropped.
pub fn replay(
    scenario: Arc<Scenario>,
    script: &ActionScript,
    info: SessionInfo,
) -> Result<Session, EngineError> {
    let mut session = Session::start(scenario, info)?;
    for step in &script.steps {
        match session.perform_action(step.t_ms, &step.action_id) {
            Ok(_) => {}
            Err(EngineError::SessionEnded) => break,
            Err(e) => return Err(e),
        }
    }
    if session.is_running() {
        let last = script.steps.last().map_or(0, |s| s.t_ms);
        let final_t = script
            .final_t_ms
            .unwrap_or(session.scenario.session_limit_ms.get())
            .max(last);
        session.advance_to(final_t)?;
    }
    Ok(session)
}

#[cfg(test)]
mod tests;
