//! Replay a scripted play-through of the sepsis scenario and print its log.
//!
//! cargo run -p rvse --example replay_session

use std::sync::Arc;

use rvse::analytics::summarize_session;
use rvse::engine::{replay, write_jsonl, ActionScript, SessionInfo};
use rvse::fixtures;

fn main() {
    let scenario = Arc::new(fixtures::load(fixtures::SEPSIS));
    let script = ActionScript::parse(
        br#"[
            {"t_ms": 8000, "action_id": "assess_abc"},
            {"t_ms": 15000, "action_id": "reassure"},
            {"t_ms": 20000, "action_id": "give_fluids"},
            {"t_ms": 31000, "action_id": "give_antibiotics"},
            {"final_t_ms": 400000}
        ]"#,
    )
    .expect("script parses");

    let session = replay(Arc::clone(&scenario), &script, SessionInfo::new("demo-1", "learner-a")).unwrap();
    let records = session.records();
    print!("{}", write_jsonl(&records));

    let summary = summarize_session(&records, "default").unwrap();
    println!(
        "outcome {:?}, goals {}/{}, off-goal {}, score {}",
        summary.outcome, summary.goals_hit, summary.goals_possible, summary.off_goal_action_count, summary.score
    );

    // Same script, same bytes.
    let again = replay(scenario, &script, SessionInfo::new("demo-1", "learner-a")).unwrap();
    assert_eq!(write_jsonl(&again.records()), write_jsonl(&records));
}
