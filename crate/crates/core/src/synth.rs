//! Synthetic learners and random scenarios.
//!
//! Every synthetic log is produced by driving a real [`Session`], so the
//! output is always a valid engine replay.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{ActionScript, EngineError, ScriptStep, Session, SessionInfo};
use crate::scenario::{
    validate, ActionCategory, ActionDef, ActionEffect, ActionId, GoalMode, GoalSpec, NonEmpty,
    Objectives, Positive, Representation, RepresentationKind, Scenario, ScenarioId, ScenarioMeta,
    StateId, StateNode, TerminalOutcome, VitalSignSet, DEFAULT_SESSION_LIMIT_MS,
};

/// Probability that a `weak` learner performs the goal in a given state.
pub const WEAK_GOAL_PROBABILITY: f64 = 0.2;

/// How a synthetic learner behaves.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Profile {
    /// Performs each state's goal near the middle of its duration.
    Competent,
    /// Competent, except never performs the goal in this state.
    ConfusedAt(StateId),
    /// Competent, except never performs this action anywhere.
    Untaught(ActionId),
    /// Performs the goal with probability 0.2 per state; otherwise sometimes
    /// tries a random non-goal action.
    Weak,
}

impl Profile {
    /// Identifier-safe form used in generated session ids.
    pub fn slug(&self) -> String {
        match self {
            Profile::Competent => "competent".into(),
            Profile::ConfusedAt(s) => format!("confused_at-{s}"),
            Profile::Untaught(a) => format!("untaught-{a}"),
            Profile::Weak => "weak".into(),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Competent => f.write_str("competent"),
            Profile::ConfusedAt(s) => write!(f, "confused_at:{s}"),
            Profile::Untaught(a) => write!(f, "untaught:{a}"),
            Profile::Weak => f.write_str("weak"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown profile {0:?}: expected competent, weak, confused_at:<state> or untaught:<action>")]
pub struct ProfileParseError(pub String);

impl FromStr for Profile {
    type Err = ProfileParseError;

    /// Accepts `confused_at:S2` as well as `confused_at(S2)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ProfileParseError(s.to_owned());
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => match s.split_once('(') {
                Some((n, rest)) => (n, Some(rest.strip_suffix(')').ok_or_else(err)?)),
                None => (s, None),
            },
        };
        let arg = arg.filter(|a| crate::scenario::is_url_safe(a));
        match (name, arg) {
            ("competent", None) => Ok(Profile::Competent),
            ("weak", None) => Ok(Profile::Weak),
            ("confused_at", Some(a)) => Ok(Profile::ConfusedAt(StateId::new(a))),
            ("untaught", Some(a)) => Ok(Profile::Untaught(ActionId::new(a))),
            _ => Err(err()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("profile names unknown state {0}")]
    UnknownState(StateId),
    #[error("profile names unknown action {0}")]
    UnknownAction(ActionId),
    #[error("n must be at least 1")]
    NoSessions,
}

/// Wall-clock start of the first synthetic session; later ones follow at
/// 15-minute intervals.
pub fn synth_epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 1, 6, 8, 0, 0).unwrap()
}

/// Plays `n` sessions of `profile` through the engine. Identical
/// `(scenario, profile, n, seed)` give identical sessions.
///
/// Session `i` is `"{scenario}-{profile}-{seed}-{i:04}"`, its learner is
/// `"learner-"` plus the same suffix.
pub fn synth_cohort(
    scenario: Arc<Scenario>,
    profile: &Profile,
    n: usize,
    seed: u64,
) -> Result<Vec<Session>, SynthError> {
    if n == 0 {
        return Err(SynthError::NoSessions);
    }
    match profile {
        Profile::ConfusedAt(s) if !scenario.states.contains_key(s) => {
            return Err(SynthError::UnknownState(s.clone()))
        }
        Profile::Untaught(a) if !scenario.actions.contains_key(a) => {
            return Err(SynthError::UnknownAction(a.clone()))
        }
        _ => {}
    }
    let report = validate(&scenario);
    if !report.is_deployable() {
        return Err(EngineError::InvalidScenario(report).into());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prefix = format!("{}-{}-{seed}", scenario.id, profile.slug());
    (0..n)
        .map(|i| {
            let info = SessionInfo::new(format!("{prefix}-{i:04}"), format!("learner-{prefix}-{i:04}"))
                .started_at(synth_epoch() + Duration::minutes(15 * i as i64));
            play(Arc::clone(&scenario), info, profile, &mut rng)
        })
        .collect()
}

fn play(
    scenario: Arc<Scenario>,
    info: SessionInfo,
    profile: &Profile,
    rng: &mut ChaCha8Rng,
) -> Result<Session, SynthError> {
    let limit = scenario.session_limit_ms.get();
    let mut session = Session::start(Arc::clone(&scenario), info)?;
    while session.is_running() {
        let visit = session.visit_seq();
        let entered = session.state_entered_at();
        let node = &scenario.states[session.current_state()];
        let plan = plan_visit(&scenario, node, session.effective_duration_ms(), profile, rng);
        for (offset, action) in plan {
            let t = (entered + offset).max(session.now());
            if t >= entered + session.effective_duration_ms() {
                break;
            }
            match session.perform_action(t, &action) {
                Ok(_) => {}
                Err(EngineError::SessionEnded) => break,
                Err(e) => return Err(e.into()),
            }
            if session.visit_seq() != visit || !session.is_running() {
                break;
            }
        }
        if session.is_running() && session.visit_seq() == visit {
            let boundary = entered + session.effective_duration_ms();
            session.advance_to(boundary.min(limit).max(session.now()))?;
        }
    }
    Ok(session)
}

/// Offsets (ms after entering) and actions a learner intends in one visit.
fn plan_visit(
    scenario: &Scenario,
    node: &StateNode,
    duration: u64,
    profile: &Profile,
    rng: &mut ChaCha8Rng,
) -> Vec<(u64, ActionId)> {
    match profile {
        Profile::Competent => competent_plan(node, duration, None, rng),
        Profile::ConfusedAt(s) if *s == node.id => Vec::new(),
        Profile::ConfusedAt(_) => competent_plan(node, duration, None, rng),
        Profile::Untaught(a) => competent_plan(node, duration, Some(a), rng),
        Profile::Weak => {
            if rng.random_bool(WEAK_GOAL_PROBABILITY) {
                competent_plan(node, duration, None, rng)
            } else if rng.random_bool(0.5) {
                let wrong: Vec<&ActionId> =
                    scenario.actions.keys().filter(|a| !node.is_goal_action(a)).collect();
                wrong.choose(rng).map(|a| vec![(duration / 4, (*a).clone())]).unwrap_or_default()
            } else {
                Vec::new()
            }
        }
    }
}

fn competent_plan(
    node: &StateNode,
    duration: u64,
    exclude: Option<&ActionId>,
    rng: &mut ChaCha8Rng,
) -> Vec<(u64, ActionId)> {
    let Some(goal) = &node.goal else { return Vec::new() };
    let candidates: Vec<&ActionId> =
        goal.action_ids.iter().filter(|a| Some(*a) != exclude).collect();
    let chosen: Vec<&ActionId> = match goal.mode {
        GoalMode::Any => candidates.into_iter().take(1).collect(),
        GoalMode::All => candidates,
    };
    let spread = duration / 10;
    let base = duration / 2 - spread + rng.random_range(0..=2 * spread);
    let step = (duration / 20).max(1);
    chosen
        .into_iter()
        .enumerate()
        .map(|(k, a)| (base + k as u64 * step, a.clone()))
        .collect()
}

/// A random valid scenario: a chain of 1–6 timed states ending in a
/// stabilized and a deceased terminal, with random goals, effects, drift and
/// session limit.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let s = random_candidate(&mut rng, seed);
        if validate(&s).is_deployable() {
            return s;
        }
    }
}

fn random_candidate(rng: &mut ChaCha8Rng, seed: u64) -> Scenario {
    let k: usize = rng.random_range(1..=6);
    let m: usize = rng.random_range(2..=6);
    let action_ids: Vec<ActionId> = (0..m).map(|i| ActionId::new(format!("a{i}"))).collect();
    let categories = [ActionCategory::Diagnostic, ActionCategory::Therapeutic, ActionCategory::Other];
    let actions: BTreeMap<ActionId, ActionDef> = action_ids
        .iter()
        .map(|id| {
            let def = ActionDef {
                id: id.clone(),
                label: NonEmpty::new(format!("Action {id}")).unwrap(),
                category: *categories.choose(rng).unwrap(),
            };
            (id.clone(), def)
        })
        .collect();

    let state_ids: Vec<StateId> = (0..k).map(|i| StateId::new(format!("s{i}"))).collect();
    let ok = StateId::new("t_ok");
    let dead = StateId::new("t_dead");
    let all_targets: Vec<StateId> =
        state_ids.iter().cloned().chain([ok.clone(), dead.clone()]).collect();

    let mut states = BTreeMap::new();
    for (i, id) in state_ids.iter().enumerate() {
        let last = i + 1 == k;
        let next = if last { None } else { Some(state_ids[i + 1].clone()) };
        let has_goal = last || rng.random_bool(0.7);
        let goal = has_goal.then(|| {
            let n_goal = rng.random_range(1..=2.min(m));
            let ids: BTreeSet<ActionId> =
                action_ids.choose_multiple(rng, n_goal).cloned().collect();
            let mode = if ids.len() > 1 && rng.random_bool(0.3) { GoalMode::All } else { GoalMode::Any };
            GoalSpec { mode, action_ids: ids }
        });
        let on_goal = goal.as_ref().map(|_| next.clone().unwrap_or_else(|| ok.clone()));
        let on_timeout = if last {
            dead.clone()
        } else if goal.is_none() {
            next.clone().unwrap()
        } else {
            all_targets.iter().filter(|t| *t != id).collect::<Vec<_>>().choose(rng).map(|t| (*t).clone()).unwrap()
        };
        let mut effects = BTreeMap::new();
        for a in &action_ids {
            if goal.as_ref().is_some_and(|g| g.action_ids.contains(a)) || !rng.random_bool(0.3) {
                continue;
            }
            let effect = if rng.random_bool(0.5) {
                ActionEffect { transition: Some(all_targets.choose(rng).unwrap().clone()), duration_delta_ms: None }
            } else {
                ActionEffect { transition: None, duration_delta_ms: Some(rng.random_range(-20_000..=20_000)) }
            };
            effects.insert(a.clone(), effect);
        }
        let vitals = random_vitals(rng);
        let drift_to = rng.random_bool(0.5).then(|| random_vitals(rng));
        states.insert(
            id.clone(),
            StateNode {
                id: id.clone(),
                vitals,
                drift_to,
                representation: Representation {
                    kind: RepresentationKind::Text,
                    content: format!("State {id}"),
                },
                goal,
                duration_ms: Positive::new(rng.random_range(1_000..=120_000)),
                on_timeout: Some(on_timeout),
                on_goal,
                effects,
                terminal: None,
            },
        );
    }
    for (id, outcome) in [(ok, TerminalOutcome::Stabilized), (dead, TerminalOutcome::Deceased)] {
        states.insert(
            id.clone(),
            StateNode {
                id: id.clone(),
                vitals: random_vitals(rng),
                drift_to: None,
                representation: Representation { kind: RepresentationKind::Text, content: format!("End {id}") },
                goal: None,
                duration_ms: None,
                on_timeout: None,
                on_goal: None,
                effects: BTreeMap::new(),
                terminal: Some(outcome),
            },
        );
    }

    let limit = if rng.random_bool(0.5) {
        DEFAULT_SESSION_LIMIT_MS
    } else {
        rng.random_range(30_000..=DEFAULT_SESSION_LIMIT_MS)
    };
    Scenario {
        id: ScenarioId::new(format!("rand-{seed}")),
        version: Positive::new(1).unwrap(),
        meta: ScenarioMeta {
            title: NonEmpty::new(format!("Random scenario {seed}")).unwrap(),
            author: "generator".into(),
            tags: vec!["generated".into()],
            learning_objectives: Objectives::new(vec![NonEmpty::new("Perform Action a0 promptly").unwrap()])
                .unwrap(),
            created_at: Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap() + Duration::seconds(seed as i64 % 86_400),
        },
        initial_state: state_ids[0].clone(),
        states,
        actions,
        session_limit_ms: Positive::new(limit).unwrap(),
    }
}

fn random_vitals(rng: &mut ChaCha8Rng) -> VitalSignSet {
    let mut v = BTreeMap::new();
    v.insert("hr".to_owned(), rng.random_range(400..=1_800) as f64 / 10.0);
    v.insert("sbp".to_owned(), rng.random_range(50..=180) as f64);
    v.insert("spo2".to_owned(), rng.random_range(700..=1_000) as f64 / 10.0);
    VitalSignSet::new(v).expect("finite, non-empty")
}

/// Up to 12 random actions at strictly increasing times spanning slightly
/// past the session limit.
pub fn random_script(scenario: &Scenario, seed: u64) -> ActionScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limit = scenario.session_limit_ms.get();
    let actions: Vec<&ActionId> = scenario.actions.keys().collect();
    let n = rng.random_range(0..=12);
    let mut times: BTreeSet<u64> = BTreeSet::new();
    while times.len() < n {
        times.insert(rng.random_range(0..=limit + limit / 10));
    }
    let steps = times
        .into_iter()
        .map(|t_ms| ScriptStep { t_ms, action_id: (*actions.choose(&mut rng).unwrap()).clone() })
        .collect::<Vec<_>>();
    let last = steps.last().map_or(0, |s| s.t_ms);
    let final_t_ms = rng.random_bool(0.8).then(|| last.max(limit));
    ActionScript::new(steps, final_t_ms).expect("times are strictly increasing")
}
