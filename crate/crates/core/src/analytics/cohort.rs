use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::engine::ScenarioRef;
use crate::scenario::{ActionId, ScenarioId, StateId, TerminalOutcome};

use super::summary::{ExitKind, SessionSummary};
use super::AnalyticsError;

/// How many wrong actions each state aggregate lists.
pub const TOP_WRONG_ACTIONS: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionCount {
    pub action_id: ActionId,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateAggregate {
    pub state_id: StateId,
    /// Sessions that entered the state at least once.
    pub n_entered: u64,
    pub n_visits: u64,
    /// Fractions of visits that ended by goal / by timeout.
    pub goal_rate: f64,
    pub timeout_rate: f64,
    /// Fraction of visits that timed out although the learner performed one
    /// of the state's goal actions elsewhere in the session.
    pub informed_timeout_rate: f64,
    /// Lower median over visits exited by goal.
    pub median_time_to_goal_ms: Option<u64>,
    pub top_wrong_actions: Vec<ActionCount>,
    pub goal_action_ids: Vec<ActionId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionMiss {
    pub action_id: ActionId,
    pub n_sessions_missed: u64,
    pub miss_rate: f64,
}

/// Lower-quantile five-number summary of session scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortDashboard {
    pub cohort_id: String,
    pub scenario: ScenarioRef,
    pub n_sessions: u64,
    pub outcome_rates: BTreeMap<TerminalOutcome, f64>,
    pub states: Vec<StateAggregate>,
    pub action_misses: Vec<ActionMiss>,
    pub score_distribution: ScoreDistribution,
}

/// Element at `floor(q × (n − 1))` of an ascending slice.
pub fn lower_quantile<T: Copy>(sorted: &[T], num: usize, den: usize) -> T {
    sorted[num * (sorted.len() - 1) / den]
}

#[derive(Default)]
struct StateAcc {
    sessions: u64,
    visits: u64,
    goals: u64,
    timeouts: u64,
    informed_timeouts: u64,
    times_to_goal: Vec<u64>,
    wrong: BTreeMap<ActionId, u64>,
    goal_actions: BTreeSet<ActionId>,
}

/// Folds summaries one at a time into a cohort dashboard.
pub struct CohortAccumulator {
    key: Option<(String, ScenarioId, u64)>,
    scenario: Option<ScenarioRef>,
    n: u64,
    outcomes: BTreeMap<TerminalOutcome, u64>,
    states: BTreeMap<StateId, StateAcc>,
    misses: BTreeMap<ActionId, u64>,
    scores: Vec<f64>,
}

impl Default for CohortAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl CohortAccumulator {
    pub fn new() -> Self {
        Self {
            key: None,
            scenario: None,
            n: 0,
            outcomes: BTreeMap::new(),
            states: BTreeMap::new(),
            misses: BTreeMap::new(),
            scores: Vec::new(),
        }
    }

    pub fn add(&mut self, s: &SessionSummary) -> Result<(), AnalyticsError> {
        let key = (s.cohort_id.clone(), s.scenario.id.clone(), s.scenario.version);
        match &self.key {
            Some(k) if *k != key => return Err(AnalyticsError::MixedCohort),
            Some(_) => {}
            None => {
                self.key = Some(key);
                self.scenario = Some(s.scenario.clone());
            }
        }
        self.n += 1;
        *self.outcomes.entry(s.outcome).or_default() += 1;
        self.scores.push(s.score);

        let mut entered = BTreeSet::new();
        for v in &s.states {
            let acc = self.states.entry(v.state_id.clone()).or_default();
            if entered.insert(&v.state_id) {
                acc.sessions += 1;
            }
            acc.visits += 1;
            match v.exited_by {
                ExitKind::Goal => {
                    acc.goals += 1;
                    acc.times_to_goal.extend(v.time_to_goal_ms);
                }
                ExitKind::Timeout => {
                    acc.timeouts += 1;
                    if v.knew_goal {
                        acc.informed_timeouts += 1;
                    }
                }
                ExitKind::Effect | ExitKind::SessionEnd => {}
            }
            for a in &v.wrong_action_ids {
                *acc.wrong.entry(a.clone()).or_default() += 1;
            }
            acc.goal_actions.extend(v.goal_action_ids.iter().cloned());
            for a in &v.goal_action_ids {
                self.misses.entry(a.clone()).or_default();
            }
        }
        for a in &s.missed_goal_actions {
            *self.misses.entry(a.clone()).or_default() += 1;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<CohortDashboard, AnalyticsError> {
        let (cohort_id, _, _) = self.key.ok_or(AnalyticsError::Empty)?;
        let n = self.n as f64;
        let outcome_rates = TerminalOutcome::ALL
            .iter()
            .map(|o| (*o, self.outcomes.get(o).copied().unwrap_or(0) as f64 / n))
            .collect();

        let states = self
            .states
            .into_iter()
            .map(|(state_id, mut acc)| {
                let visits = acc.visits as f64;
                acc.times_to_goal.sort_unstable();
                let mut wrong: Vec<_> = acc
                    .wrong
                    .into_iter()
                    .map(|(action_id, count)| ActionCount { action_id, count })
                    .collect();
                wrong.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.action_id.cmp(&b.action_id)));
                wrong.truncate(TOP_WRONG_ACTIONS);
                StateAggregate {
                    state_id,
                    n_entered: acc.sessions,
                    n_visits: acc.visits,
                    goal_rate: acc.goals as f64 / visits,
                    timeout_rate: acc.timeouts as f64 / visits,
                    informed_timeout_rate: acc.informed_timeouts as f64 / visits,
                    median_time_to_goal_ms: (!acc.times_to_goal.is_empty())
                        .then(|| lower_quantile(&acc.times_to_goal, 1, 2)),
                    top_wrong_actions: wrong,
                    goal_action_ids: acc.goal_actions.into_iter().collect(),
                }
            })
            .collect();

        let action_misses = self
            .misses
            .into_iter()
            .map(|(action_id, missed)| ActionMiss {
                action_id,
                n_sessions_missed: missed,
                miss_rate: missed as f64 / n,
            })
            .collect();

        let mut scores = self.scores;
        scores.sort_by(f64::total_cmp);
        let score_distribution = ScoreDistribution {
            min: scores[0],
            p25: lower_quantile(&scores, 1, 4),
            median: lower_quantile(&scores, 1, 2),
            p75: lower_quantile(&scores, 3, 4),
            max: scores[scores.len() - 1],
        };

        Ok(CohortDashboard {
            cohort_id,
            scenario: self.scenario.expect("set with key"),
            n_sessions: self.n,
            outcome_rates,
            states,
            action_misses,
            score_distribution,
        })
    }
}

/// Aggregates sessions sharing one cohort and one scenario version.
pub fn aggregate_cohort(summaries: &[SessionSummary]) -> Result<CohortDashboard, AnalyticsError> {
    let mut acc = CohortAccumulator::new();
    for s in summaries {
        acc.add(s)?;
    }
    acc.finish()
}

/// Groups summaries by (cohort, scenario id, version) and aggregates each
/// group. Output is ordered by that key.
pub fn aggregate_all(summaries: &[SessionSummary]) -> Vec<CohortDashboard> {
    let mut groups: BTreeMap<(String, ScenarioId, u64), CohortAccumulator> = BTreeMap::new();
    for s in summaries {
        groups
            .entry((s.cohort_id.clone(), s.scenario.id.clone(), s.scenario.version))
            .or_default()
            .add(s)
            .expect("grouped by key");
    }
    groups.into_values().map(|acc| acc.finish().expect("groups are non-empty")).collect()
}
