use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::engine::ScenarioRef;
use crate::scenario::{ActionId, ScenarioId, StateId, TerminalOutcome};

use super::cohort::CohortDashboard;
use super::AnalyticsError;

/// Goal rate every other goal-bearing state must reach before a missed
/// action is blamed on teaching rather than on general weakness.
pub const TEACHING_GAP_BASELINE_GOAL_RATE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub theta_state_fail: f64,
    pub theta_cohort_fail: f64,
    pub theta_action_miss: f64,
    pub min_sessions: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { theta_state_fail: 0.8, theta_cohort_fail: 0.6, theta_action_miss: 0.7, min_sessions: 10 }
    }
}

impl DetectorConfig {
    pub fn validated(self) -> Result<Self, AnalyticsError> {
        for (name, v) in [
            ("theta_state_fail", self.theta_state_fail),
            ("theta_cohort_fail", self.theta_cohort_fail),
            ("theta_action_miss", self.theta_action_miss),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(AnalyticsError::InvalidConfig(format!("{name} must be in (0, 1], got {v}")));
            }
        }
        if self.min_sessions < 1 {
            return Err(AnalyticsError::InvalidConfig("min_sessions must be at least 1".into()));
        }
        Ok(self)
    }
}

/// Why a scenario might be failing its learners.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    IllDesigned,
    LearnerLevelDissonance,
    TeachingGap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DetectorId {
    /// A state fails in every cohort.
    D1,
    /// One cohort struggles where another succeeds.
    D2,
    /// One goal action is missed while everything else goes fine.
    D3,
}

impl DetectorId {
    pub fn hypothesis(self) -> Hypothesis {
        match self {
            DetectorId::D1 => Hypothesis::IllDesigned,
            DetectorId::D2 => Hypothesis::LearnerLevelDissonance,
            DetectorId::D3 => Hypothesis::TeachingGap,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum Locus {
    State(StateId),
    Action(ActionId),
    Cohort(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtLeast,
    AtMost,
}

impl Comparison {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparison::AtLeast => value >= threshold,
            Comparison::AtMost => value <= threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub metric: String,
    pub value: f64,
    pub threshold: f64,
    pub comparison: Comparison,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alarm {
    pub scenario: ScenarioRef,
    pub detector_id: DetectorId,
    pub hypothesis: Hypothesis,
    /// Cohort whose data tripped the detector; absent for cross-cohort findings.
    pub cohort_id: Option<String>,
    pub locus: Option<Locus>,
    pub evidence: Evidence,
    pub emitted_at: DateTime<Utc>,
}

impl Alarm {
    /// Identity of the finding, ignoring when it was emitted and the exact
    /// evidence values.
    pub fn key(&self) -> (ScenarioId, u64, DetectorId, Option<String>, Option<Locus>) {
        (
            self.scenario.id.clone(),
            self.scenario.version,
            self.detector_id,
            self.cohort_id.clone(),
            self.locus.clone(),
        )
    }
}

/// Runs the three trouble detectors over cohort dashboards. Dashboards are
/// grouped by scenario version; within a group only cohorts with at least
/// `min_sessions` sessions are considered.
///
/// * D1 ill-designed: a state's informed timeout rate is at least
///   `theta_state_fail` in every eligible cohort.
/// * D2 learner-level dissonance: a cohort's stabilized rate is at most
///   `1 - theta_cohort_fail` while another cohort's is at least
///   `theta_cohort_fail`.
/// * D3 teaching gap: in a cohort, at least `theta_action_miss` of sessions
///   missed a goal action they never performed, while every other
///   goal-bearing state reaches a 0.5 goal rate.
pub fn detect_troubles(
    dashboards: &[CohortDashboard],
    cfg: &DetectorConfig,
    emitted_at: DateTime<Utc>,
) -> Vec<Alarm> {
    let mut groups: BTreeMap<(&ScenarioId, u64), Vec<&CohortDashboard>> = BTreeMap::new();
    for d in dashboards.iter().filter(|d| d.n_sessions >= cfg.min_sessions) {
        groups.entry((&d.scenario.id, d.scenario.version)).or_default().push(d);
    }

    let mut alarms = Vec::new();
    for cohorts in groups.into_values() {
        let scenario = cohorts[0].scenario.clone();
        let mut alarm = |id: DetectorId, cohort: Option<&str>, locus: Locus, evidence: Evidence| {
            debug_assert!(evidence.comparison.holds(evidence.value, evidence.threshold));
            alarms.push(Alarm {
                scenario: scenario.clone(),
                detector_id: id,
                hypothesis: id.hypothesis(),
                cohort_id: cohort.map(str::to_owned),
                locus: Some(locus),
                evidence,
                emitted_at,
            });
        };

        // D1
        let mut worst: BTreeMap<&StateId, (usize, f64)> = BTreeMap::new();
        for d in &cohorts {
            for s in d.states.iter().filter(|s| s.n_visits > 0) {
                let e = worst.entry(&s.state_id).or_insert((0, f64::INFINITY));
                if s.informed_timeout_rate >= cfg.theta_state_fail {
                    e.0 += 1;
                    e.1 = e.1.min(s.informed_timeout_rate);
                }
            }
        }
        for (state, (n_failing, min_rate)) in worst {
            if n_failing == cohorts.len() {
                alarm(
                    DetectorId::D1,
                    None,
                    Locus::State(state.clone()),
                    Evidence {
                        metric: "informed_timeout_rate".into(),
                        value: min_rate,
                        threshold: cfg.theta_state_fail,
                        comparison: Comparison::AtLeast,
                    },
                );
            }
        }

        // D2
        let stabilized = |d: &CohortDashboard| {
            d.outcome_rates.get(&TerminalOutcome::Stabilized).copied().unwrap_or(0.0)
        };
        let low = 1.0 - cfg.theta_cohort_fail;
        for d in &cohorts {
            let rate = stabilized(d);
            let other_succeeds = cohorts
                .iter()
                .any(|o| o.cohort_id != d.cohort_id && stabilized(o) >= cfg.theta_cohort_fail);
            if rate <= low && other_succeeds {
                alarm(
                    DetectorId::D2,
                    Some(&d.cohort_id),
                    Locus::Cohort(d.cohort_id.clone()),
                    Evidence {
                        metric: "stabilized_rate".into(),
                        value: rate,
                        threshold: low,
                        comparison: Comparison::AtMost,
                    },
                );
            }
        }

        // D3
        for d in &cohorts {
            for miss in &d.action_misses {
                if miss.n_sessions_missed == 0 || miss.miss_rate < cfg.theta_action_miss {
                    continue;
                }
                let others_fine = d
                    .states
                    .iter()
                    .filter(|s| {
                        s.n_visits > 0
                            && !s.goal_action_ids.is_empty()
                            && !s.goal_action_ids.contains(&miss.action_id)
                    })
                    .all(|s| s.goal_rate >= TEACHING_GAP_BASELINE_GOAL_RATE);
                if others_fine {
                    alarm(
                        DetectorId::D3,
                        Some(&d.cohort_id),
                        Locus::Action(miss.action_id.clone()),
                        Evidence {
                            metric: "miss_rate".into(),
                            value: miss.miss_rate,
                            threshold: cfg.theta_action_miss,
                            comparison: Comparison::AtLeast,
                        },
                    );
                }
            }
        }
    }
    alarms
}
