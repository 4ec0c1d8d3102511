//! Mixed synthetic corpus: profile-driven sepsis sessions plus random
//! scripts on random scenarios, spread over a pool of learners and three
//! cohorts.

use std::sync::Arc;

use chrono::{Duration, TimeZone, Utc};
use rvse_core::engine::{replay, write_jsonl, SessionInfo};
use rvse_core::fixtures;
use rvse_core::scenario::{ActionId, StateId};
use rvse_core::synth::{random_scenario, random_script, synth_cohort, Profile};

pub const COHORTS: [&str; 3] = ["red", "green", "blue"];

pub fn learner(i: usize) -> String {
    format!("learner-{:03}", i % 97)
}

pub fn cohort_of_learner(learner: &str) -> String {
    let n: usize = learner.trim_start_matches("learner-").parse().unwrap();
    COHORTS[n % 3].to_owned()
}

/// `n` JSON Lines logs, one per session.
pub fn build(n: usize, seed: u64) -> Vec<String> {
    let sepsis = Arc::new(fixtures::load(fixtures::SEPSIS));
    let profiles = [
        Profile::Competent,
        Profile::Weak,
        Profile::ConfusedAt(StateId::new("hypotensive")),
        Profile::Untaught(ActionId::new("give_antibiotics")),
    ];
    let per_profile = n / 8;
    let mut logs = Vec::with_capacity(n);
    for (k, p) in profiles.iter().enumerate() {
        for s in synth_cohort(Arc::clone(&sepsis), p, per_profile, seed + k as u64).unwrap() {
            let i = logs.len();
            let mut records = s.records();
            records[0].payload["learner_id"] = learner(i).into();
            logs.push(write_jsonl(&records));
        }
    }
    let scenarios: Vec<_> = (0..7).map(|k| Arc::new(random_scenario(seed * 31 + k))).collect();
    let epoch = Utc.with_ymd_and_hms(2025, 2, 1, 0, 0, 0).unwrap();
    while logs.len() < n {
        let i = logs.len();
        let sc = &scenarios[i % scenarios.len()];
        let script = random_script(sc, seed ^ (i as u64).wrapping_mul(0x9e37_79b9));
        let info = SessionInfo::new(format!("rs-{seed}-{i:05}"), learner(i))
            .started_at(epoch + Duration::minutes((i % 13) as i64 * 7));
        logs.push(write_jsonl(&replay(Arc::clone(sc), &script, info).unwrap().records()));
    }
    logs
}
