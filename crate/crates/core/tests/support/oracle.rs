//! Brute-force recomputation of dashboards straight from JSON Lines text.
//! Shares no code with the library: every number is recounted from the raw
//! records each time it is needed.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

pub struct Visit {
    pub state: String,
    pub entered: u64,
    pub exit: &'static str,
    pub ttg: Option<u64>,
    pub wrong: Vec<String>,
    pub goal_ids: Vec<String>,
}

pub struct Session {
    pub id: String,
    pub learner: String,
    pub scenario_id: String,
    pub version: u64,
    pub checksum: String,
    pub started_at: Option<String>,
    pub outcome: String,
    pub visits: Vec<Visit>,
    pub performed: BTreeSet<String>,
}

pub fn parse_session(jsonl: &str) -> Session {
    let lines: Vec<Value> = jsonl.lines().filter(|l| !l.trim().is_empty()).map(|l| serde_json::from_str(l).unwrap()).collect();
    let head = &lines[0];
    let mut s = Session {
        id: head["session_id"].as_str().unwrap().into(),
        learner: head["payload"]["learner_id"].as_str().unwrap().into(),
        scenario_id: head["scenario_id"].as_str().unwrap().into(),
        version: head["scenario_version"].as_u64().unwrap(),
        checksum: head["payload"]["scenario_checksum"].as_str().unwrap().into(),
        started_at: head["payload"]["started_at"].as_str().map(str::to_owned),
        outcome: String::new(),
        visits: Vec::new(),
        performed: BTreeSet::new(),
    };
    for l in &lines[1..] {
        let t = l["t_ms"].as_u64().unwrap();
        let p = &l["payload"];
        match l["kind"].as_str().unwrap() {
            "state_entered" => s.visits.push(Visit {
                state: p["state_id"].as_str().unwrap().into(),
                entered: t,
                exit: "session_end",
                ttg: None,
                wrong: Vec::new(),
                goal_ids: p["goal"]["action_ids"]
                    .as_array()
                    .map(|a| a.iter().map(|x| x.as_str().unwrap().to_owned()).collect())
                    .unwrap_or_default(),
            }),
            "action_performed" => {
                let a = p["action_id"].as_str().unwrap().to_owned();
                s.performed.insert(a.clone());
                let v = s.visits.last_mut().unwrap();
                let r = p["result"].as_str().unwrap();
                if r != "goal" && r != "goal_progress" {
                    v.wrong.push(a);
                }
                if r == "transition" {
                    v.exit = "effect";
                }
            }
            "goal_achieved" => {
                let v = s.visits.last_mut().unwrap();
                v.exit = "goal";
                v.ttg = Some(t - v.entered);
            }
            "timeout_deterioration" => s.visits.last_mut().unwrap().exit = "timeout",
            "session_end" => s.outcome = p["outcome"].as_str().unwrap().into(),
            _ => {}
        }
    }
    s
}

pub fn score(s: &Session) -> f64 {
    let possible = s.visits.iter().filter(|v| !v.goal_ids.is_empty()).count();
    let hit = s.visits.iter().filter(|v| v.exit == "goal").count();
    let off: usize = s.visits.iter().map(|v| v.wrong.len()).sum();
    let base = if possible == 0 { 100.0 } else { 100.0 * hit as f64 / possible as f64 };
    (base - 5.0 * off as f64).clamp(0.0, 100.0)
}

fn missed(s: &Session, action: &str) -> bool {
    s.visits.iter().any(|v| v.exit == "timeout" && v.goal_ids.iter().any(|g| g == action)) && !s.performed.contains(action)
}

fn lower(sorted: &[f64], num: usize, den: usize) -> f64 {
    sorted[num * (sorted.len() - 1) / den]
}

/// One dashboard per (cohort, scenario id, version), in that order.
pub fn cohort_dashboards(sessions: &[Session], cohort_of: &dyn Fn(&Session) -> String) -> Vec<Value> {
    let keys: BTreeSet<(String, String, u64)> =
        sessions.iter().map(|s| (cohort_of(s), s.scenario_id.clone(), s.version)).collect();
    let mut out = Vec::new();
    for (cohort, sid, ver) in keys {
        let group: Vec<&Session> = sessions
            .iter()
            .filter(|s| cohort_of(s) == cohort && s.scenario_id == sid && s.version == ver)
            .collect();
        let n = group.len() as f64;
        let rate = |o: &str| group.iter().filter(|s| s.outcome == o).count() as f64 / n;

        let state_ids: BTreeSet<&str> = group.iter().flat_map(|s| s.visits.iter().map(|v| v.state.as_str())).collect();
        let states: Vec<Value> = state_ids
            .into_iter()
            .map(|st| {
                let visits: Vec<(&Session, &Visit)> =
                    group.iter().flat_map(|s| s.visits.iter().filter(|v| v.state == st).map(move |v| (*s, v))).collect();
                let nv = visits.len() as f64;
                let count = |f: &dyn Fn(&Session, &Visit) -> bool| visits.iter().filter(|(s, v)| f(s, v)).count() as f64;
                let mut ttg: Vec<u64> = visits.iter().filter_map(|(_, v)| v.ttg).collect();
                ttg.sort();
                let mut wrong: BTreeMap<&str, u64> = BTreeMap::new();
                for (_, v) in &visits {
                    for a in &v.wrong {
                        *wrong.entry(a).or_default() += 1;
                    }
                }
                let mut wrong: Vec<(&str, u64)> = wrong.into_iter().collect();
                wrong.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
                wrong.truncate(5);
                let goal_ids: BTreeSet<&str> = visits.iter().flat_map(|(_, v)| v.goal_ids.iter().map(String::as_str)).collect();
                json!({
                    "state_id": st,
                    "n_entered": group.iter().filter(|s| s.visits.iter().any(|v| v.state == st)).count(),
                    "n_visits": visits.len(),
                    "goal_rate": count(&|_, v| v.exit == "goal") / nv,
                    "timeout_rate": count(&|_, v| v.exit == "timeout") / nv,
                    "informed_timeout_rate": count(&|s, v| v.exit == "timeout" && v.goal_ids.iter().any(|g| s.performed.contains(g))) / nv,
                    "median_time_to_goal_ms": if ttg.is_empty() { Value::Null } else { json!(ttg[(ttg.len() - 1) / 2]) },
                    "top_wrong_actions": wrong.iter().map(|(a, c)| json!({"action_id": a, "count": c})).collect::<Vec<_>>(),
                    "goal_action_ids": goal_ids,
                })
            })
            .collect();

        let goal_actions: BTreeSet<&str> =
            group.iter().flat_map(|s| s.visits.iter().flat_map(|v| v.goal_ids.iter().map(String::as_str))).collect();
        let misses: Vec<Value> = goal_actions
            .into_iter()
            .map(|a| {
                let k = group.iter().filter(|s| missed(s, a)).count();
                json!({"action_id": a, "n_sessions_missed": k, "miss_rate": k as f64 / n})
            })
            .collect();

        let mut scores: Vec<f64> = group.iter().map(|s| score(s)).collect();
        scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.push(json!({
            "cohort_id": cohort,
            "scenario": {"id": sid, "version": ver, "checksum": group[0].checksum},
            "n_sessions": group.len(),
            "outcome_rates": {"stabilized": rate("stabilized"), "deceased": rate("deceased"), "timed_out": rate("timed_out")},
            "states": states,
            "action_misses": misses,
            "score_distribution": {
                "min": scores[0], "p25": lower(&scores, 1, 4), "median": lower(&scores, 1, 2),
                "p75": lower(&scores, 3, 4), "max": scores[scores.len() - 1],
            },
        }));
    }
    out
}

pub fn learner_dashboards(sessions: &[Session]) -> BTreeMap<String, Value> {
    let learners: BTreeSet<&str> = sessions.iter().map(|s| s.learner.as_str()).collect();
    learners
        .into_iter()
        .map(|l| {
            let mine: Vec<&Session> = sessions.iter().filter(|s| s.learner == l).collect();
            let scenario_ids: BTreeSet<&str> = mine.iter().map(|s| s.scenario_id.as_str()).collect();
            let scenarios: Vec<Value> = scenario_ids
                .into_iter()
                .map(|sid| {
                    let mut runs: Vec<&Session> = mine.iter().copied().filter(|s| s.scenario_id == sid).collect();
                    runs.sort_by(|a, b| (&a.started_at, &a.id).cmp(&(&b.started_at, &b.id)));
                    let latest = runs[runs.len() - 1];
                    let mut weak: Vec<&str> = Vec::new();
                    for v in latest.visits.iter().filter(|v| v.exit == "timeout") {
                        if !weak.contains(&v.state.as_str()) {
                            weak.push(&v.state);
                        }
                    }
                    json!({
                        "scenario_id": sid,
                        "attempts": runs.iter().map(|s| json!({
                            "session_id": s.id, "scenario_version": s.version,
                            "started_at": s.started_at, "outcome": s.outcome, "score": score(s),
                        })).collect::<Vec<_>>(),
                        "latest_score": score(latest),
                        "weaknesses": weak,
                    })
                })
                .collect();
            (l.to_owned(), json!({"learner_id": l, "n_sessions": mine.len(), "scenarios": scenarios}))
        })
        .collect()
}

/// Structural equality with a 1e-9 tolerance on non-integer numbers.
pub fn assert_close(actual: &Value, expected: &Value, path: &str) {
    match (actual, expected) {
        (Value::Object(a), Value::Object(e)) => {
            let ka: BTreeSet<_> = a.keys().collect();
            let ke: BTreeSet<_> = e.keys().collect();
            assert_eq!(ka, ke, "keys differ at {path}");
            for k in ka {
                assert_close(&a[k], &e[k], &format!("{path}/{k}"));
            }
        }
        (Value::Array(a), Value::Array(e)) => {
            assert_eq!(a.len(), e.len(), "lengths differ at {path}");
            for (i, (x, y)) in a.iter().zip(e).enumerate() {
                assert_close(x, y, &format!("{path}/{i}"));
            }
        }
        (Value::Number(a), Value::Number(e)) if a.is_f64() || e.is_f64() => {
            let (x, y) = (a.as_f64().unwrap(), e.as_f64().unwrap());
            assert!((x - y).abs() <= 1e-9, "{path}: {x} vs {y}");
        }
        _ => assert_eq!(actual, expected, "at {path}"),
    }
}
