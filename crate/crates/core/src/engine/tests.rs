use std::sync::Arc;

use super::*;
use crate::fixtures;

fn scenario(doc: &str) -> Arc<Scenario> {
    Arc::new(fixtures::load(doc))
}

fn start(doc: &str) -> Session {
    Session::start(scenario(doc), SessionInfo::new("s-1", "learner-1")).unwrap()
}

fn kinds(events: &[SessionEvent]) -> Vec<(u64, EventKind)> {
    events.iter().map(|e| (e.t_ms, e.body.kind())).collect()
}

fn act(id: &str) -> ActionId {
    ActionId::new(id)
}

use EventKind::*;

#[test]
fn start_enters_initial_state() {
    let s = start(fixtures::TWO_STATE);
    assert_eq!(s.current_state().as_str(), "S1");
    assert_eq!(s.now(), 0);
    assert_eq!(kinds(s.history()), vec![(0, SessionStart), (0, StateEntered)]);
    assert!(s.is_running());
}

#[test]
fn terminal_initial_state_ends_immediately() {
    let mut doc: serde_json::Value = serde_json::from_str(fixtures::TWO_STATE).unwrap();
    doc["initial_state"] = "T".into();
    // S1 becomes unreachable, so drop it to keep the scenario valid.
    doc["states"].as_object_mut().unwrap().remove("S1");
    let sc = Arc::new(crate::scenario::parse_scenario(doc.to_string().as_bytes()).unwrap());
    let s = Session::start(sc, SessionInfo::new("s", "l")).unwrap();
    assert_eq!(kinds(s.history()), vec![(0, SessionStart), (0, StateEntered), (0, SessionEnd)]);
    assert_eq!(s.outcome(), Some(TerminalOutcome::Stabilized));
    assert_eq!(s.status(), SessionStatus::Ended);
}

#[test]
fn invalid_scenario_is_rejected() {
    let (_, doc) = fixtures::DEFECTS[0];
    let err = Session::start(scenario(doc), SessionInfo::new("s", "l")).unwrap_err();
    match err {
        EngineError::InvalidScenario(report) => assert!(report.error_codes().contains("E1")),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn timeout_fires_exactly_at_boundary() {
    let mut s = start(fixtures::TIMEOUT_LOOP);
    assert!(s.advance_to(9_999).unwrap().is_empty());
    let ev = s.advance_to(10_000).unwrap().to_vec();
    assert_eq!(kinds(&ev), vec![(10_000, TimeoutDeterioration), (10_000, StateEntered)]);
    assert_eq!(s.current_state().as_str(), "B");
}

#[test]
fn chained_timeouts() {
    let mut s = start(fixtures::TIMEOUT_LOOP);
    let ev = s.advance_to(35_000).unwrap().to_vec();
    assert_eq!(
        kinds(&ev),
        vec![
            (10_000, TimeoutDeterioration),
            (10_000, StateEntered),
            (30_000, TimeoutDeterioration),
            (30_000, StateEntered),
        ]
    );
    assert_eq!(s.now(), 35_000);
    assert_eq!(s.state_entered_at(), 30_000);
}

#[test]
fn session_limit_ends_timed_out() {
    let mut s = start(fixtures::TIMEOUT_LOOP);
    s.advance_to(10_000_000).unwrap();
    let last = s.history().last().unwrap();
    assert_eq!(last.t_ms, 600_000);
    assert!(matches!(
        last.body,
        EventBody::SessionEnd { outcome: TerminalOutcome::TimedOut, reason: EndReason::SessionLimit }
    ));
    assert_eq!(s.now(), 600_000);
    assert!(s.history().iter().all(|e| e.t_ms <= 600_000));
    assert_eq!(s.advance_to(700_000).unwrap_err(), EngineError::SessionEnded);
}

#[test]
fn goal_action_before_boundary() {
    let mut s = start(fixtures::TWO_STATE);
    let ev = s.perform_action(5_000, &act("apply_oxygen")).unwrap().to_vec();
    assert_eq!(
        kinds(&ev),
        vec![(5_000, ActionPerformed), (5_000, GoalAchieved), (5_000, StateEntered), (5_000, SessionEnd)]
    );
    assert_eq!(s.outcome(), Some(TerminalOutcome::Stabilized));
}

#[test]
fn timeout_wins_tie_with_action() {
    let mut s = start(fixtures::TIMEOUT_LOOP);
    let ev = s.perform_action(10_000, &act("call_help")).unwrap().to_vec();
    assert_eq!(
        kinds(&ev),
        vec![
            (10_000, TimeoutDeterioration),
            (10_000, StateEntered),
            (10_000, ActionPerformed),
            (10_000, GoalAchieved),
            (10_000, StateEntered),
            (10_000, SessionEnd),
        ]
    );
    match &ev[2].body {
        EventBody::ActionPerformed { state_id, .. } => assert_eq!(state_id.as_str(), "B"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn wrong_action_is_logged_only() {
    let mut s = start(fixtures::SEPSIS);
    let ev = s.perform_action(1_000, &act("give_fluids")).unwrap().to_vec();
    assert_eq!(kinds(&ev), vec![(1_000, ActionPerformed)]);
    assert!(matches!(ev[0].body, EventBody::ActionPerformed { result: ActionResult::None, .. }));
    assert_eq!(s.current_state().as_str(), "arrival");
    assert_eq!(s.effective_duration_ms(), 60_000);
}

#[test]
fn unknown_action_and_time_reversal() {
    let mut s = start(fixtures::SEPSIS);
    assert_eq!(
        s.perform_action(10, &act("teleport")).unwrap_err(),
        EngineError::UnknownAction(act("teleport"))
    );
    s.advance_to(100).unwrap();
    assert_eq!(
        s.perform_action(50, &act("assess_abc")).unwrap_err(),
        EngineError::TimeReversal { now: 100, requested: 50 }
    );
    assert!(matches!(s.render_frame(99), Err(EngineError::TimeReversal { .. })));
}

#[test]
fn negative_duration_effect_is_clamped() {
    let mut s = start(fixtures::SEPSIS);
    s.perform_action(30_000, &act("assess_abc")).unwrap();
    assert_eq!(s.current_state().as_str(), "hypotensive");
    // 90 s state, sedative at 70 s in would shorten it to 60 s: clamp to 70 s + 1 ms.
    let ev = s.perform_action(100_000, &act("give_sedative")).unwrap().to_vec();
    assert!(matches!(ev[0].body, EventBody::ActionPerformed { result: ActionResult::DurationChange, .. }));
    assert_eq!(s.effective_duration_ms(), 70_001);
    let ev = s.advance_to(100_001).unwrap().to_vec();
    assert_eq!(kinds(&ev), vec![(100_001, TimeoutDeterioration), (100_001, StateEntered)]);
    assert_eq!(s.current_state().as_str(), "shocked");
}

#[test]
fn positive_duration_effect_extends_state() {
    let mut s = start(fixtures::SEPSIS);
    s.perform_action(10_000, &act("reassure")).unwrap();
    assert_eq!(s.effective_duration_ms(), 65_000);
    assert!(s.advance_to(64_999).unwrap().is_empty());
    assert_eq!(kinds(s.advance_to(65_000).unwrap()), vec![(65_000, TimeoutDeterioration), (65_000, StateEntered)]);
}

#[test]
fn effect_transition_and_all_goal() {
    let mut s = start(fixtures::SEPSIS);
    s.perform_action(30_000, &act("assess_abc")).unwrap();
    s.perform_action(40_000, &act("give_fluids")).unwrap();
    assert_eq!(s.current_state().as_str(), "infection");
    let ev = s.perform_action(41_000, &act("give_sedative")).unwrap().to_vec();
    assert_eq!(kinds(&ev), vec![(41_000, ActionPerformed), (41_000, StateEntered)]);
    assert_eq!(s.current_state().as_str(), "septic_shock");
    s.perform_action(42_000, &act("give_antibiotics")).unwrap();
    assert_eq!(s.current_state().as_str(), "stabilizing");

    let ev = s.perform_action(43_000, &act("apply_oxygen")).unwrap().to_vec();
    assert!(matches!(ev[0].body, EventBody::ActionPerformed { result: ActionResult::GoalProgress, .. }));
    let ev = s.perform_action(44_000, &act("apply_oxygen")).unwrap().to_vec();
    assert!(matches!(ev[0].body, EventBody::ActionPerformed { result: ActionResult::None, .. }));
    let ev = s.perform_action(45_000, &act("check_lactate")).unwrap().to_vec();
    assert_eq!(
        kinds(&ev),
        vec![(45_000, ActionPerformed), (45_000, GoalAchieved), (45_000, StateEntered), (45_000, SessionEnd)]
    );
    assert_eq!(s.outcome(), Some(TerminalOutcome::Stabilized));
    assert_eq!(
        s.perform_action(46_000, &act("check_lactate")).unwrap_err(),
        EngineError::SessionEnded
    );
}

#[test]
fn action_after_deadly_timeout_reports_session_ended() {
    let mut s = start(fixtures::TWO_STATE);
    assert_eq!(s.perform_action(10_000, &act("apply_oxygen")).unwrap_err(), EngineError::SessionEnded);
    assert_eq!(
        kinds(s.history()),
        vec![(0, SessionStart), (0, StateEntered), (10_000, TimeoutDeterioration), (10_000, StateEntered), (10_000, SessionEnd)]
    );
}

#[test]
fn vitals_interpolation() {
    let sc = fixtures::load(fixtures::TWO_STATE);
    let s1 = &sc.states["S1"];
    assert_eq!(vitals_at(s1, 0, 10_000), s1.vitals);
    let mid = vitals_at(s1, 5_000, 10_000);
    assert_eq!(mid.get("hr"), Some(100.0));
    assert_eq!(mid.get("spo2"), Some(86.0));
    assert_eq!(vitals_at(s1, 10_000, 10_000), *s1.drift_to.as_ref().unwrap());

    let t = &sc.states["T"];
    assert_eq!(vitals_at(t, 123_456, 0), t.vitals);
    let loop_sc = fixtures::load(fixtures::TIMEOUT_LOOP);
    let a = &loop_sc.states["A"];
    assert_eq!(vitals_at(a, 7_000, 10_000), a.vitals);
}

#[test]
fn frames_follow_engine() {
    let mut s = start(fixtures::TWO_STATE);
    let f = s.render_frame(0).unwrap();
    assert_eq!(f.vitals.get("hr"), Some(80.0));
    assert!(f.history.is_empty());
    assert_eq!(f.status, SessionStatus::Running);

    let mut s = start(fixtures::SEPSIS);
    s.perform_action(2_000, &act("give_fluids")).unwrap();
    let f = s.render_frame(30_000).unwrap();
    assert_eq!(f.history, vec![act("give_fluids")]);
    assert_eq!(f.state_id.as_str(), "arrival");
    assert_eq!(f.elapsed_in_state_ms, 30_000);
    let node = &s.scenario().states["arrival"];
    assert_eq!(f.vitals, vitals_at(node, 30_000, 60_000));
    assert_eq!(f.vitals.get("hr"), Some(117.0));
}

#[test]
fn frame_of_ended_session_is_frozen() {
    let mut s = start(fixtures::TWO_STATE);
    s.advance_to(50_000).unwrap();
    let f = s.render_frame(90_000).unwrap();
    assert_eq!(f.state_id.as_str(), "T");
    assert_eq!(f.outcome, Some(TerminalOutcome::Stabilized));
    assert_eq!(f.elapsed_in_state_ms, 0);
}

#[test]
fn replay_is_deterministic() {
    let sc = scenario(fixtures::SEPSIS);
    let script = ActionScript::parse(
        br#"[{"t_ms": 3000, "action_id": "give_fluids"}, {"t_ms": 20000, "action_id": "assess_abc"},
            {"t_ms": 200000, "action_id": "give_antibiotics"}, {"final_t_ms": 600000}]"#,
    )
    .unwrap();
    let a = replay(sc.clone(), &script, SessionInfo::new("r", "l")).unwrap();
    let b = replay(sc, &script, SessionInfo::new("r", "l")).unwrap();
    assert_eq!(write_jsonl(&a.records()), write_jsonl(&b.records()));
}

#[test]
fn empty_script_is_pure_deterioration() {
    let s = replay(scenario(fixtures::SEPSIS), &ActionScript::default(), SessionInfo::new("r", "l")).unwrap();
    assert_eq!(s.outcome(), Some(TerminalOutcome::Deceased));
    assert!(s.history().iter().all(|e| !matches!(e.body.kind(), ActionPerformed | GoalAchieved)));
    // arrival 60 s, hypoxic 45 s, shocked 60 s, septic_shock 60 s.
    let timeouts: Vec<u64> = s
        .history()
        .iter()
        .filter(|e| e.body.kind() == TimeoutDeterioration)
        .map(|e| e.t_ms)
        .collect();
    assert_eq!(timeouts, vec![60_000, 105_000, 165_000, 225_000]);

    let s = replay(scenario(fixtures::TIMEOUT_LOOP), &ActionScript::default(), SessionInfo::new("r", "l")).unwrap();
    assert_eq!(s.outcome(), Some(TerminalOutcome::TimedOut));
}

#[test]
fn perfect_play_event_count() {
    // Goal at every state midpoint.
    let s = replay(
        scenario(fixtures::TIMEOUT_LOOP),
        &ActionScript::parse(br#"[{"t_ms": 5000, "action_id": "call_help"}]"#).unwrap(),
        SessionInfo::new("r", "l"),
    )
    .unwrap();
    assert_eq!(s.outcome(), Some(TerminalOutcome::Stabilized));
    assert_eq!(s.history().len(), 2 + 3 * 1 + 1);

    // Hand trace: arrival [0,60s) mid 30s -> hypotensive [30s,120s) mid 75s ->
    // infection [75s,165s) mid 120s -> stabilizing [120s,240s), an `all` goal
    // of two actions at 180s and 181s -> stable. Four goal exits; the first
    // half of the `all` goal adds one extra action_performed.
    let script = ActionScript::parse(
        br#"[{"t_ms": 30000, "action_id": "assess_abc"}, {"t_ms": 75000, "action_id": "give_fluids"},
            {"t_ms": 120000, "action_id": "give_antibiotics"}, {"t_ms": 180000, "action_id": "apply_oxygen"},
            {"t_ms": 181000, "action_id": "check_lactate"}]"#,
    )
    .unwrap();
    let s = replay(scenario(fixtures::SEPSIS), &script, SessionInfo::new("r", "l")).unwrap();
    assert_eq!(s.outcome(), Some(TerminalOutcome::Stabilized));
    assert_eq!(s.history().len(), 2 + 3 * 4 + 1 + 1);
    assert_eq!(s.now(), 181_000);
}

#[test]
fn replay_drops_actions_after_end() {
    let script = ActionScript::parse(
        br#"[{"t_ms": 5000, "action_id": "apply_oxygen"}, {"t_ms": 6000, "action_id": "apply_oxygen"}]"#,
    )
    .unwrap();
    let s = replay(scenario(fixtures::TWO_STATE), &script, SessionInfo::new("r", "l")).unwrap();
    assert_eq!(s.history().iter().filter(|e| e.body.kind() == ActionPerformed).count(), 1);
}

#[test]
fn started_at_is_recorded() {
    let at: DateTime<Utc> = "2025-02-03T04:05:06Z".parse().unwrap();
    let s = Session::start(scenario(fixtures::TWO_STATE), SessionInfo::new("s", "l").started_at(at)).unwrap();
    match &s.history()[0].body {
        EventBody::SessionStart { started_at, learner_id, scenario_checksum } => {
            assert_eq!(*started_at, Some(at));
            assert_eq!(learner_id, "l");
            assert_eq!(scenario_checksum, &s.scenario_ref().checksum);
        }
        other => panic!("{other:?}"),
    }
}
