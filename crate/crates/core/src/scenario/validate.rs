use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{Scenario, StateId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_or_action_id: Option<String>,
    pub message: String,
}

impl Finding {
    fn new(code: &str, id: impl Into<Option<String>>, message: String) -> Self {
        Self { code: code.to_owned(), state_or_action_id: id.into(), message }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Finding>,
    pub warnings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_deployable(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn error_codes(&self) -> BTreeSet<&str> {
        self.errors.iter().map(|f| f.code.as_str()).collect()
    }

    pub fn warning_codes(&self) -> BTreeSet<&str> {
        self.warnings.iter().map(|f| f.code.as_str()).collect()
    }
}

/// Checks the graph-level authoring rules.
///
/// Errors: E1 dangling transition target, E2 goal/effect action missing from
/// the catalog, E3 state unreachable from the initial state, E4 non-terminal
/// state without a timeout (`duration_ms` + `on_timeout`), E5 timeout
/// self-loop, E6 non-terminal state that cannot reach any terminal state,
/// E7 terminal state carrying transitions.
///
/// Warnings: W1 state longer than the session limit, W2 catalog action never
/// referenced, W3 no learning objective mentions any goal action.
pub fn validate(s: &Scenario) -> ValidationReport {
    let mut report = ValidationReport::default();
    let errors = &mut report.errors;

    if !s.states.contains_key(&s.initial_state) {
        errors.push(Finding::new(
            "E1",
            s.initial_state.to_string(),
            format!("initial_state {} is not a state", s.initial_state),
        ));
    }

    for (id, node) in &s.states {
        for target in Scenario::successors(node) {
            if !s.states.contains_key(target) {
                errors.push(Finding::new(
                    "E1",
                    target.to_string(),
                    format!("state {id} transitions to unknown state {target}"),
                ));
            }
        }

        let referenced = node
            .goal
            .iter()
            .flat_map(|g| g.action_ids.iter())
            .chain(node.effects.keys());
        for action in referenced {
            if !s.actions.contains_key(action) {
                errors.push(Finding::new(
                    "E2",
                    action.to_string(),
                    format!("state {id} references unknown action {action}"),
                ));
            }
        }

        if node.is_terminal() {
            let carries = node.duration_ms.is_some()
                || node.on_timeout.is_some()
                || node.on_goal.is_some()
                || node.goal.is_some()
                || !node.effects.is_empty();
            if carries {
                errors.push(Finding::new(
                    "E7",
                    id.to_string(),
                    format!("terminal state {id} must not carry a duration, goal, effects or transitions"),
                ));
            }
        } else {
            if node.duration_ms.is_none() || node.on_timeout.is_none() {
                errors.push(Finding::new(
                    "E4",
                    id.to_string(),
                    format!("non-terminal state {id} needs both duration_ms and on_timeout"),
                ));
            }
            if node.on_timeout.as_ref() == Some(id) {
                errors.push(Finding::new(
                    "E5",
                    id.to_string(),
                    format!("state {id} times out into itself"),
                ));
            }
        }
    }

    let reachable = reachable_from(s, &s.initial_state);
    for id in s.states.keys() {
        if !reachable.contains(id) {
            errors.push(Finding::new(
                "E3",
                id.to_string(),
                format!("state {id} is unreachable from {}", s.initial_state),
            ));
        }
    }

    for (id, node) in &s.states {
        if node.is_terminal() {
            continue;
        }
        let reaches_terminal = reachable_from(s, id)
            .iter()
            .any(|r| s.states[r].is_terminal());
        if !reaches_terminal {
            errors.push(Finding::new(
                "E6",
                id.to_string(),
                format!("no terminal state is reachable from {id}"),
            ));
        }
    }

    let limit = s.session_limit_ms.get();
    for (id, node) in &s.states {
        if let Some(d) = node.duration_ms {
            if d.get() > limit {
                report.warnings.push(Finding::new(
                    "W1",
                    id.to_string(),
                    format!("state {id} lasts {} ms, longer than the {limit} ms session", d.get()),
                ));
            }
        }
    }

    let used: BTreeSet<_> = s
        .states
        .values()
        .flat_map(|n| n.goal.iter().flat_map(|g| g.action_ids.iter()).chain(n.effects.keys()))
        .collect();
    for id in s.actions.keys() {
        if !used.contains(id) {
            report.warnings.push(Finding::new(
                "W2",
                id.to_string(),
                format!("action {id} is never a goal or an effect"),
            ));
        }
    }

    let goal_actions: BTreeSet<_> = s
        .states
        .values()
        .flat_map(|n| n.goal.iter().flat_map(|g| g.action_ids.iter()))
        .collect();
    if !goal_actions.is_empty() {
        let objectives: Vec<String> = s.meta.learning_objectives.iter().map(str::to_lowercase).collect();
        let mentioned = goal_actions.iter().any(|a| {
            let label = s.actions.get(*a).map(|d| d.label.as_str().to_lowercase());
            objectives.iter().any(|o| {
                o.contains(&a.as_str().to_lowercase())
                    || label.as_ref().is_some_and(|l| o.contains(l.as_str()))
            })
        });
        if !mentioned {
            report.warnings.push(Finding::new(
                "W3",
                None,
                "no learning objective mentions any goal action by id or label".to_owned(),
            ));
        }
    }

    report
}

/// States reachable from `start` (inclusive) following timeout, goal and
/// effect edges. Terminal states are not expanded; dangling targets are
/// skipped.
fn reachable_from(s: &Scenario, start: &StateId) -> BTreeSet<StateId> {
    let mut seen = BTreeSet::new();
    if !s.states.contains_key(start) {
        return seen;
    }
    let mut queue = VecDeque::from([start.clone()]);
    seen.insert(start.clone());
    while let Some(id) = queue.pop_front() {
        let node = &s.states[&id];
        if node.is_terminal() {
            continue;
        }
        for next in Scenario::successors(node) {
            if s.states.contains_key(next) && seen.insert(next.clone()) {
                queue.push_back(next.clone());
            }
        }
    }
    seen
}
