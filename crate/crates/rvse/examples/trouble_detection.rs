//! Run the trouble detectors over synthetic cohorts with known problems
//! and print the alarms they raise.
//!
//! cargo run -p rvse --example trouble_detection

use std::sync::Arc;

use chrono::Utc;
use rvse::analytics::{aggregate_cohort, detect_troubles, summarize_session, CohortDashboard, DetectorConfig};
use rvse::fixtures;
use rvse::scenario::{ActionId, Scenario, StateId};
use rvse::synth::{synth_cohort, Profile};

fn dashboard(scenario: &Arc<Scenario>, profile: Profile, cohort: &str, seed: u64) -> CohortDashboard {
    let summaries: Vec<_> = synth_cohort(Arc::clone(scenario), &profile, 20, seed)
        .unwrap()
        .iter()
        .map(|s| summarize_session(&s.records(), cohort).unwrap())
        .collect();
    aggregate_cohort(&summaries).unwrap()
}

fn main() {
    let scenario = Arc::new(fixtures::load(fixtures::SEPSIS));
    let cfg = DetectorConfig::default();
    let cases = [
        ("everyone competent", vec![dashboard(&scenario, Profile::Competent, "a", 1)]),
        ("stuck at hypotensive", vec![dashboard(&scenario, Profile::ConfusedAt(StateId::new("hypotensive")), "a", 2)]),
        ("antibiotics never taught", vec![dashboard(&scenario, Profile::Untaught(ActionId::new("give_antibiotics")), "a", 3)]),
        (
            "one weak cohort",
            vec![dashboard(&scenario, Profile::Competent, "strong", 4), dashboard(&scenario, Profile::Weak, "weak", 5)],
        ),
    ];
    for (name, dashboards) in cases {
        let alarms = detect_troubles(&dashboards, &cfg, Utc::now());
        println!("{name}: {} alarm(s)", alarms.len());
        for a in alarms {
            println!(
                "  {:?} {:?} locus={:?} {} = {:.2} vs {:.2}",
                a.detector_id, a.hypothesis, a.locus, a.evidence.metric, a.evidence.value, a.evidence.threshold
            );
        }
    }
}
