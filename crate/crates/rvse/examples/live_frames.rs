//! Drive a session step by step the way an interactive client would,
//! polling display frames as virtual time passes.
//!
//! cargo run -p rvse --example live_frames

use std::sync::Arc;

use rvse::engine::{Session, SessionInfo};
use rvse::fixtures;
use rvse::scenario::ActionId;

fn show(t: u64, s: &mut Session) {
    let f = s.render_frame(t).unwrap();
    let vitals: Vec<String> = f.vitals.iter().map(|(k, v)| format!("{k}={v:.0}")).collect();
    println!(
        "{:>6} ms  {:<14} {:<40} done={:?}",
        t,
        f.state_id.as_str(),
        vitals.join(" "),
        f.history.iter().map(|a| a.as_str()).collect::<Vec<_>>()
    );
}

fn main() {
    let scenario = Arc::new(fixtures::load(fixtures::SEPSIS));
    let mut s = Session::start(scenario, SessionInfo::new("live-1", "learner-b")).unwrap();

    for t in [0, 5_000, 10_000] {
        show(t, &mut s);
    }
    s.perform_action(12_000, &ActionId::new("assess_abc")).unwrap();
    for t in [20_000, 40_000, 60_000, 80_000] {
        show(t, &mut s);
    }
    // Learner freezes; the patient keeps deteriorating.
    let mut t = 80_000;
    while s.is_running() {
        t += 30_000;
        for e in s.advance_to(t).unwrap() {
            println!("{:>6} ms  event {:?}", e.t_ms, e.body.kind());
        }
    }
    println!("ended {:?} at {} ms", s.outcome(), s.now());
}
