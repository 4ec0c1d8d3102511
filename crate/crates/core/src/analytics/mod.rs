//! Turns session event logs into summaries, dashboards and alarms.
//!
//! Everything here is a pure function of its inputs: summaries depend only
//! on the log (plus the cohort label), dashboards only on summaries, alarms
//! only on dashboards, the detector config and the supplied timestamp.

mod cohort;
mod detect;
mod learner;
mod summary;

pub use cohort::{
    aggregate_all, aggregate_cohort, lower_quantile, ActionCount, ActionMiss, CohortAccumulator,
    CohortDashboard, ScoreDistribution, StateAggregate, TOP_WRONG_ACTIONS,
};
pub use detect::{
    detect_troubles, Alarm, Comparison, DetectorConfig, DetectorId, Evidence, Hypothesis, Locus,
    TEACHING_GAP_BASELINE_GOAL_RATE,
};
pub use learner::{learner_dashboard, Attempt, LearnerDashboard, ScenarioTrajectory};
pub use summary::{score, summarize_session, ExitKind, SessionSummary, StateVisit, OFF_GOAL_PENALTY};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("log has no session_end")]
    IncompleteLog,
    #[error("corrupt log at record {index}: {reason}")]
    CorruptLog { index: usize, reason: String },
    #[error("summaries span several cohorts or scenario versions")]
    MixedCohort,
    #[error("summaries belong to several learners")]
    MixedLearner,
    #[error("no summaries")]
    Empty,
    #[error("invalid detector config: {0}")]
    InvalidConfig(String),
}
