use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::scenario::{ScenarioId, StateId, TerminalOutcome};

use super::summary::{ExitKind, SessionSummary};
use super::AnalyticsError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub session_id: String,
    pub scenario_version: u64,
    pub started_at: Option<DateTime<Utc>>,
    pub outcome: TerminalOutcome,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTrajectory {
    pub scenario_id: ScenarioId,
    /// Ordered by start time, then session id.
    pub attempts: Vec<Attempt>,
    pub latest_score: f64,
    /// States that timed out in the latest attempt, first occurrence order.
    pub weaknesses: Vec<StateId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerDashboard {
    pub learner_id: String,
    pub n_sessions: u64,
    pub scenarios: Vec<ScenarioTrajectory>,
}

pub fn learner_dashboard(summaries: &[SessionSummary]) -> Result<LearnerDashboard, AnalyticsError> {
    let first = summaries.first().ok_or(AnalyticsError::Empty)?;
    if summaries.iter().any(|s| s.learner_id != first.learner_id) {
        return Err(AnalyticsError::MixedLearner);
    }

    let mut by_scenario: BTreeMap<&ScenarioId, Vec<&SessionSummary>> = BTreeMap::new();
    for s in summaries {
        by_scenario.entry(&s.scenario.id).or_default().push(s);
    }

    let scenarios = by_scenario
        .into_iter()
        .map(|(id, mut runs)| {
            runs.sort_by(|a, b| {
                a.started_at.cmp(&b.started_at).then_with(|| a.session_id.cmp(&b.session_id))
            });
            let latest = runs[runs.len() - 1];
            let mut weaknesses: Vec<StateId> = Vec::new();
            for v in latest.states.iter().filter(|v| v.exited_by == ExitKind::Timeout) {
                if !weaknesses.contains(&v.state_id) {
                    weaknesses.push(v.state_id.clone());
                }
            }
            ScenarioTrajectory {
                scenario_id: id.clone(),
                attempts: runs
                    .iter()
                    .map(|s| Attempt {
                        session_id: s.session_id.clone(),
                        scenario_version: s.scenario.version,
                        started_at: s.started_at,
                        outcome: s.outcome,
                        score: s.score,
                    })
                    .collect(),
                latest_score: latest.score,
                weaknesses,
            }
        })
        .collect();

    Ok(LearnerDashboard {
        learner_id: first.learner_id.clone(),
        n_sessions: summaries.len() as u64,
        scenarios,
    })
}
