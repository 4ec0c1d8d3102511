//! Synthesize two cohorts on the sepsis scenario and print their dashboards
//! plus one learner's trajectory.
//!
//! cargo run -p rvse --example cohort_analytics

use std::sync::Arc;

use rvse::analytics::{aggregate_all, learner_dashboard, summarize_session};
use rvse::fixtures;
use rvse::synth::{synth_cohort, Profile};

fn main() {
    let scenario = Arc::new(fixtures::load(fixtures::SEPSIS));
    let mut summaries = Vec::new();
    for (cohort, profile, seed) in [("ward-a", Profile::Competent, 1), ("ward-b", Profile::Weak, 2)] {
        for s in synth_cohort(Arc::clone(&scenario), &profile, 15, seed).unwrap() {
            summaries.push(summarize_session(&s.records(), cohort).unwrap());
        }
    }

    for d in aggregate_all(&summaries) {
        println!("== {} ({} sessions)", d.cohort_id, d.n_sessions);
        println!("   outcomes {:?}", d.outcome_rates);
        println!("   scores   {:?}", d.score_distribution);
        for st in &d.states {
            println!(
                "   {:<14} entered {:>3}  goal {:.2}  timeout {:.2}  median-to-goal {:?}",
                st.state_id.as_str(),
                st.n_entered,
                st.goal_rate,
                st.timeout_rate,
                st.median_time_to_goal_ms
            );
        }
        for m in &d.action_misses {
            println!("   missed {:<18} {:.2}", m.action_id.as_str(), m.miss_rate);
        }
    }

    let first = summaries[0].learner_id.clone();
    let mine: Vec<_> = summaries.iter().filter(|s| s.learner_id == first).cloned().collect();
    println!("{}", serde_json::to_string_pretty(&learner_dashboard(&mine).unwrap()).unwrap());
}
