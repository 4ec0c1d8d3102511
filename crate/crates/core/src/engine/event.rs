use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::scenario::{ActionId, GoalSpec, ScenarioId, StateId, TerminalOutcome};

/// What an action did when it was performed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionResult {
    /// Satisfied the state's goal; a `goal_achieved` follows at the same instant.
    Goal,
    /// A not-yet-satisfied member of an `all` goal.
    GoalProgress,
    /// Effect with a transition; a `state_entered` follows at the same instant.
    Transition,
    /// Effect that only changed the remaining duration.
    DurationChange,
    /// Logged only.
    None,
}

impl ActionResult {
    pub fn is_on_goal(self) -> bool {
        matches!(self, ActionResult::Goal | ActionResult::GoalProgress)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    TerminalState,
    SessionLimit,
}

/// Event body, tagged by `kind` with the kind-specific `payload`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    SessionStart {
        learner_id: String,
        scenario_checksum: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        started_at: Option<DateTime<Utc>>,
    },
    StateEntered {
        state_id: StateId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        goal: Option<GoalSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        terminal: Option<TerminalOutcome>,
    },
    ActionPerformed {
        action_id: ActionId,
        state_id: StateId,
        result: ActionResult,
    },
    GoalAchieved {
        state_id: StateId,
        action_id: ActionId,
    },
    TimeoutDeterioration {
        state_id: StateId,
    },
    SessionEnd {
        outcome: TerminalOutcome,
        reason: EndReason,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SessionStart,
    StateEntered,
    ActionPerformed,
    GoalAchieved,
    TimeoutDeterioration,
    SessionEnd,
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::SessionStart { .. } => EventKind::SessionStart,
            EventBody::StateEntered { .. } => EventKind::StateEntered,
            EventBody::ActionPerformed { .. } => EventKind::ActionPerformed,
            EventBody::GoalAchieved { .. } => EventKind::GoalAchieved,
            EventBody::TimeoutDeterioration { .. } => EventKind::TimeoutDeterioration,
            EventBody::SessionEnd { .. } => EventKind::SessionEnd,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub t_ms: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

/// One line of a `.events.jsonl` file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRecord {
    pub t_ms: u64,
    pub kind: EventKind,
    pub session_id: String,
    pub scenario_id: ScenarioId,
    pub scenario_version: u64,
    pub payload: serde_json::Value,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: payload does not match kind {kind:?}: {source}")]
    Payload { line: usize, kind: EventKind, source: serde_json::Error },
}

impl LogRecord {
    pub fn new(
        session_id: &str,
        scenario_id: &ScenarioId,
        scenario_version: u64,
        event: &SessionEvent,
    ) -> Self {
        let tagged = serde_json::to_value(&event.body).expect("event bodies always serialize");
        let payload = tagged.get("payload").cloned().unwrap_or(serde_json::Value::Null);
        Self {
            t_ms: event.t_ms,
            kind: event.body.kind(),
            session_id: session_id.to_owned(),
            scenario_id: scenario_id.clone(),
            scenario_version,
            payload,
        }
    }

    /// Decodes the payload into a typed event.
    pub fn event(&self) -> Result<SessionEvent, serde_json::Error> {
        let tagged = serde_json::json!({ "kind": self.kind, "payload": self.payload });
        Ok(SessionEvent { t_ms: self.t_ms, body: serde_json::from_value(tagged)? })
    }

    /// Compact JSON for one log line, without the trailing newline.
    pub fn to_line(&self) -> String {
        let value = serde_json::to_value(self).expect("log records always serialize");
        let mut out = Vec::new();
        crate::scenario::write_canonical(&value, &mut out);
        String::from_utf8(out).expect("serde_json writes UTF-8")
    }
}

/// Serializes records as JSON Lines (one record per line, trailing newline).
pub fn write_jsonl(records: &[LogRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    out
}

/// Parses JSON Lines; blank lines are skipped. Payloads are checked against
/// their kind.
pub fn read_jsonl(text: &str) -> Result<Vec<LogRecord>, LogError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: LogRecord =
            serde_json::from_str(line).map_err(|source| LogError::Json { line: i + 1, source })?;
        record
            .event()
            .map_err(|source| LogError::Payload { line: i + 1, kind: record.kind, source })?;
        records.push(record);
    }
    Ok(records)
}
