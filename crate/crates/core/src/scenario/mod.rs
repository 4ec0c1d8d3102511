//! Scenario documents: a timed graph of clinical states plus the catalog of
//! actions a learner may perform.
//!
//! Field-local invariants (positive durations, non-empty labels, safe media
//! paths, goal/on_goal pairing) are enforced while deserializing, so every
//! [`Scenario`] value in memory is structurally sound. Graph-level rules
//! (dangling references, reachability, dead ends) are findings reported by
//! [`validate`], because an author needs to see them as a list rather than
//! as the first parse failure.

mod document;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize};

pub use document::{canonical_serialize, checksum, parse_scenario, ParseError};
pub(crate) use document::write_canonical;
pub use validate::{validate, Finding, ValidationReport};

/// Default session length: ten minutes of virtual time.
pub const DEFAULT_SESSION_LIMIT_MS: u64 = 600_000;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                if !is_url_safe(&s) {
                    return Err(serde::de::Error::custom(format!(
                        "identifier {s:?} must be non-empty and use only [A-Za-z0-9._~-]"
                    )));
                }
                Ok(Self(s))
            }
        }
    };
}

string_id!(
    /// URL-safe scenario identifier.
    ScenarioId
);
string_id!(StateId);
string_id!(ActionId);

/// True when `s` is non-empty and made only of RFC 3986 unreserved characters.
pub fn is_url_safe(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.' | b'~'))
}

/// A strictly positive integer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Positive(u64);

impl Positive {
    pub fn new(v: u64) -> Option<Self> {
        (v > 0).then_some(Self(v))
    }

    pub fn get(self) -> u64 {
        self.0
    }
}

impl<'de> Deserialize<'de> for Positive {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = u64::deserialize(d)?;
        Positive::new(v).ok_or_else(|| serde::de::Error::custom("expected a positive integer, got 0"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: ScenarioId,
    pub version: Positive,
    pub meta: ScenarioMeta,
    pub initial_state: StateId,
    pub states: BTreeMap<StateId, StateNode>,
    pub actions: BTreeMap<ActionId, ActionDef>,
    #[serde(default = "default_session_limit")]
    pub session_limit_ms: Positive,
}

fn default_session_limit() -> Positive {
    Positive(DEFAULT_SESSION_LIMIT_MS)
}

impl Scenario {
    pub fn state(&self, id: &StateId) -> Option<&StateNode> {
        self.states.get(id)
    }

    /// The states a transition can lead to out of `node`: timeout, goal and
    /// effect targets, in that order.
    pub fn successors(node: &StateNode) -> impl Iterator<Item = &StateId> {
        node.on_timeout
            .iter()
            .chain(node.on_goal.iter())
            .chain(node.effects.values().filter_map(|e| e.transition.as_ref()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioMeta {
    pub title: NonEmpty,
    pub author: String,
    #[serde(default)]
    pub tags: Vec<String>,
    pub learning_objectives: Objectives,
    pub created_at: DateTime<Utc>,
}

/// A string that must contain at least one non-whitespace character.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct NonEmpty(String);

impl NonEmpty {
    pub fn new(s: impl Into<String>) -> Option<Self> {
        let s = s.into();
        (!s.trim().is_empty()).then_some(Self(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl<'de> Deserialize<'de> for NonEmpty {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        NonEmpty::new(String::deserialize(d)?)
            .ok_or_else(|| serde::de::Error::custom("expected a non-empty string"))
    }
}

/// At least one learning objective.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Objectives(Vec<NonEmpty>);

impl Objectives {
    pub fn new(items: Vec<NonEmpty>) -> Option<Self> {
        (!items.is_empty()).then_some(Self(items))
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(NonEmpty::as_str)
    }
}

impl<'de> Deserialize<'de> for Objectives {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Objectives::new(Vec::deserialize(d)?)
            .ok_or_else(|| serde::de::Error::custom("at least one learning objective is required"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStateNode")]
pub struct StateNode {
    pub id: StateId,
    pub vitals: VitalSignSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_to: Option<VitalSignSet>,
    pub representation: Representation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<GoalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_ms: Option<Positive>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on_timeout: Option<StateId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on_goal: Option<StateId>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub effects: BTreeMap<ActionId, ActionEffect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal: Option<TerminalOutcome>,
}

impl StateNode {
    pub fn is_terminal(&self) -> bool {
        self.terminal.is_some()
    }

    pub fn is_goal_action(&self, action: &ActionId) -> bool {
        self.goal.as_ref().is_some_and(|g| g.action_ids.contains(action))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStateNode {
    id: StateId,
    vitals: VitalSignSet,
    #[serde(default)]
    drift_to: Option<VitalSignSet>,
    representation: Representation,
    #[serde(default)]
    goal: Option<GoalSpec>,
    #[serde(default)]
    duration_ms: Option<Positive>,
    #[serde(default)]
    on_timeout: Option<StateId>,
    #[serde(default)]
    on_goal: Option<StateId>,
    #[serde(default)]
    effects: BTreeMap<ActionId, ActionEffect>,
    #[serde(default)]
    terminal: Option<TerminalOutcome>,
}

impl TryFrom<RawStateNode> for StateNode {
    type Error = String;

    fn try_from(raw: RawStateNode) -> Result<Self, String> {
        if raw.goal.is_some() != raw.on_goal.is_some() {
            return Err("goal and on_goal must be given together".into());
        }
        if let Some(drift) = &raw.drift_to {
            if !drift.0.keys().eq(raw.vitals.0.keys()) {
                return Err("drift_to must carry exactly the vital signs listed in vitals".into());
            }
        }
        if let Some(goal) = &raw.goal {
            if let Some(a) = raw.effects.keys().find(|a| goal.action_ids.contains(*a)) {
                return Err(format!("action {a} is both a goal and an effect of this state"));
            }
        }
        Ok(StateNode {
            id: raw.id,
            vitals: raw.vitals,
            drift_to: raw.drift_to,
            representation: raw.representation,
            goal: raw.goal,
            duration_ms: raw.duration_ms,
            on_timeout: raw.on_timeout,
            on_goal: raw.on_goal,
            effects: raw.effects,
            terminal: raw.terminal,
        })
    }
}

/// Named vital-sign readings, e.g. `hr`, `sbp`, `rr`, `spo2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct VitalSignSet(BTreeMap<String, f64>);

impl VitalSignSet {
    pub fn new(values: BTreeMap<String, f64>) -> Option<Self> {
        (!values.is_empty() && values.values().all(|v| v.is_finite())).then_some(Self(values))
    }

    pub fn get(&self, sign: &str) -> Option<f64> {
        self.0.get(sign).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn set(&mut self, sign: &str, value: f64) -> bool {
        match self.0.get_mut(sign) {
            Some(v) if value.is_finite() => {
                *v = value;
                true
            }
            _ => false,
        }
    }

    pub(crate) fn map_values(&self, mut f: impl FnMut(&str, f64) -> f64) -> Self {
        Self(self.0.iter().map(|(k, v)| (k.clone(), f(k, *v))).collect())
    }
}

impl<'de> Deserialize<'de> for VitalSignSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let values = BTreeMap::<String, f64>::deserialize(d)?;
        VitalSignSet::new(values).ok_or_else(|| {
            serde::de::Error::custom("vital signs must be a non-empty map of finite numbers")
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentationKind {
    Text,
    Photo,
    Video,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRepresentation")]
pub struct Representation {
    pub kind: RepresentationKind,
    pub content: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRepresentation {
    kind: RepresentationKind,
    content: String,
}

impl TryFrom<RawRepresentation> for Representation {
    type Error = String;

    fn try_from(raw: RawRepresentation) -> Result<Self, String> {
        if raw.content.trim().is_empty() {
            return Err("representation content must be non-empty".into());
        }
        if raw.kind != RepresentationKind::Text && !is_safe_relative_path(&raw.content) {
            return Err(format!("media path {:?} must be relative without '..' segments", raw.content));
        }
        Ok(Representation { kind: raw.kind, content: raw.content })
    }
}

/// Relative, `/`-separated, no empty, `.` or `..` segments.
pub fn is_safe_relative_path(p: &str) -> bool {
    !p.is_empty()
        && !p.starts_with('/')
        && !p.contains('\\')
        && p.split('/').all(|seg| !seg.is_empty() && seg != "." && seg != "..")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalMode {
    #[default]
    Any,
    All,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGoalSpec")]
pub struct GoalSpec {
    pub mode: GoalMode,
    pub action_ids: BTreeSet<ActionId>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGoalSpec {
    #[serde(default)]
    mode: GoalMode,
    action_ids: Vec<ActionId>,
}

impl TryFrom<RawGoalSpec> for GoalSpec {
    type Error = String;

    fn try_from(raw: RawGoalSpec) -> Result<Self, String> {
        if raw.action_ids.is_empty() {
            return Err("goal action_ids must be non-empty".into());
        }
        let n = raw.action_ids.len();
        let action_ids: BTreeSet<_> = raw.action_ids.into_iter().collect();
        if action_ids.len() != n {
            return Err("goal action_ids must not contain duplicates".into());
        }
        Ok(GoalSpec { mode: raw.mode, action_ids })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionCategory {
    Diagnostic,
    Therapeutic,
    Other,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionDef {
    pub id: ActionId,
    pub label: NonEmpty,
    pub category: ActionCategory,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawActionEffect")]
pub struct ActionEffect {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<StateId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_delta_ms: Option<i64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawActionEffect {
    #[serde(default)]
    transition: Option<StateId>,
    #[serde(default)]
    duration_delta_ms: Option<i64>,
}

impl TryFrom<RawActionEffect> for ActionEffect {
    type Error = String;

    fn try_from(raw: RawActionEffect) -> Result<Self, String> {
        if raw.transition.is_none() && raw.duration_delta_ms.is_none() {
            return Err("an effect needs a transition or a duration_delta_ms".into());
        }
        Ok(ActionEffect { transition: raw.transition, duration_delta_ms: raw.duration_delta_ms })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalOutcome {
    Stabilized,
    Deceased,
    TimedOut,
}

impl TerminalOutcome {
    pub const ALL: [TerminalOutcome; 3] =
        [TerminalOutcome::Stabilized, TerminalOutcome::Deceased, TerminalOutcome::TimedOut];

    pub fn as_str(self) -> &'static str {
        match self {
            TerminalOutcome::Stabilized => "stabilized",
            TerminalOutcome::Deceased => "deceased",
            TerminalOutcome::TimedOut => "timed_out",
        }
    }
}

impl fmt::Display for TerminalOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
