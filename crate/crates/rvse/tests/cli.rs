#[path = "support/server.rs"]
mod server;

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use server::{code, run, stdout_json, Server};

fn fixture(name: &str) -> String {
    format!("{}/../core/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn last_line(path: &Path) -> Value {
    let text = fs::read_to_string(path).unwrap();
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

#[test]
fn validate_exit_codes() {
    let out = run(&["validate", &fixture("sepsis.rvs.json")]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["errors"], json!([]));

    let out = run(&["validate", &fixture("defects/e1_dangling_target.rvs.json")]);
    assert_eq!(code(&out), 1);
    assert_eq!(stdout_json(&out)["errors"][0]["code"], "E1");

    assert_eq!(code(&run(&["validate", "/no/such/file.rvs.json"])), 3);
    assert_eq!(code(&run(&["validate"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.rvs.json");
    fs::write(&bad, "{\"id\": ").unwrap();
    let out = run(&["validate", p(&bad)]);
    assert_eq!(code(&out), 1);
    assert_eq!(stdout_json(&out)["error"], "malformed_document");
}

#[test]
fn run_replays_scripts() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("perfect.json");
    fs::write(
        &script,
        r#"[{"t_ms": 10000, "action_id": "assess_abc"}, {"t_ms": 20000, "action_id": "give_fluids"},
            {"t_ms": 30000, "action_id": "give_antibiotics"}, {"t_ms": 40000, "action_id": "apply_oxygen"},
            {"t_ms": 41000, "action_id": "check_lactate"}]"#,
    )
    .unwrap();
    let log = dir.path().join("perfect.events.jsonl");
    let out = run(&["run", &fixture("sepsis.rvs.json"), "--script", p(&script), "--out", p(&log)]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["score"], 100.0);
    assert_eq!(last_line(&log)["payload"]["outcome"], "stabilized");

    let idle = dir.path().join("idle.events.jsonl");
    let out = run(&["run", &fixture("sepsis.rvs.json"), "--out", p(&idle)]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["goals_hit"], 0);
    let text = fs::read_to_string(&idle).unwrap();
    assert!(!text.contains("action_performed"));
    assert_eq!(text.matches("timeout_deterioration").count(), 4);

    let again = dir.path().join("again.events.jsonl");
    run(&["run", &fixture("sepsis.rvs.json"), "--script", p(&script), "--out", p(&again)]);
    assert_eq!(fs::read(&log).unwrap(), fs::read(&again).unwrap());

    let out = run(&["run", &fixture("defects/e3_unreachable.rvs.json"), "--out", p(&dir.path().join("x"))]);
    assert_eq!(code(&out), 1);
    assert_eq!(stdout_json(&out)["errors"][0]["code"], "E3");
}

fn synth(dir: &Path, profile: &str, n: &str, seed: &str) -> (i32, Value) {
    let out = run(&[
        "synth", "--scenario", &fixture("sepsis.rvs.json"), "--profile", profile, "--n", n, "--seed", seed, "--out",
        p(dir),
    ]);
    let v = if out.stdout.is_empty() { Value::Null } else { stdout_json(&out) };
    (code(&out), v)
}

fn dir_contents(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = fs::read(&p).unwrap();
            (p.file_name().unwrap().into(), bytes)
        })
        .collect();
    v.sort();
    v
}

#[test]
fn synth_writes_deterministic_logs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let (c, v) = synth(&a, "competent", "3", "9");
    assert_eq!((c, v["sessions"].clone()), (0, json!(3)));
    let files = dir_contents(&a);
    assert_eq!(files.len(), 3);
    for (name, _) in &files {
        assert_eq!(last_line(&a.join(name))["payload"]["outcome"], "stabilized");
    }
    let b = dir.path().join("b");
    synth(&b, "competent", "3", "9");
    assert_eq!(files, dir_contents(&b));

    assert_eq!(synth(&dir.path().join("c"), "lazy", "3", "9").0, 2);
    assert_eq!(synth(&dir.path().join("c"), "competent", "0", "9").0, 2);
    assert_eq!(synth(&dir.path().join("c"), "confused_at:nowhere", "1", "9").0, 2);
}

#[test]
fn analyze_reports_alarms_through_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let healthy = dir.path().join("healthy");
    synth(&healthy, "competent", "20", "1");
    let out_dir = dir.path().join("out-healthy");
    let out = run(&["analyze", "--events", p(&healthy), "--out", p(&out_dir)]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["sessions"], 20);
    let alarms: Value = serde_json::from_slice(&fs::read(out_dir.join("alarms.json")).unwrap()).unwrap();
    assert_eq!(alarms, json!([]));
    assert!(out_dir.join("cohort-default-sepsis-ward-v1.json").is_file());

    let confused = dir.path().join("confused");
    synth(&confused, "confused_at(hypotensive)", "12", "2");
    fs::write(confused.join("broken.events.jsonl"), "{\"nope\": 1}\n").unwrap();
    let out_dir = dir.path().join("out-confused");
    let out = run(&["analyze", "--events", p(&confused), "--out", p(&out_dir)]);
    assert_eq!(code(&out), 1);
    let v = stdout_json(&out);
    assert_eq!(v["sessions"], 12);
    assert_eq!(v["corrupt"].as_array().unwrap().len(), 1);
    let alarms: Value = serde_json::from_slice(&fs::read(out_dir.join("alarms.json")).unwrap()).unwrap();
    assert_eq!(alarms.as_array().unwrap().len(), 1);
    assert_eq!(alarms[0]["detector_id"], "D1");

    // Cohort map splits the same logs; neither half reaches min_sessions.
    let map = dir.path().join("cohorts.json");
    let mut m = serde_json::Map::new();
    for (i, (name, _)) in dir_contents(&confused).iter().enumerate() {
        let sid = name.to_str().unwrap().trim_end_matches(".events.jsonl").to_owned();
        m.insert(sid, json!(if i % 2 == 0 { "even" } else { "odd" }));
    }
    fs::write(&map, Value::Object(m).to_string()).unwrap();
    let out = run(&["analyze", "--events", p(&confused), "--cohorts", p(&map), "--out", p(&dir.path().join("o3"))]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["cohort_dashboards"].as_array().unwrap().len(), 2);

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(code(&run(&["analyze", "--events", p(&empty), "--out", p(&dir.path().join("o4"))])), 3);
    assert_eq!(code(&run(&["analyze", "--events", "/no/such/dir", "--out", p(&dir.path().join("o5"))])), 3);

    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"theta_state_fail": 2}"#).unwrap();
    let out = run(&["analyze", "--events", p(&healthy), "--out", p(&out_dir), "--config", p(&cfg)]);
    assert_eq!(code(&out), 2);
}

const TOKENS: &str = r#"{
    "c": {"name": "ada", "role": "creator"},
    "t": {"name": "tim", "role": "tutor"},
    "l": {"name": "lee", "role": "learner", "cohort_id": "ward-a"}
}"#;

#[test]
fn serve_upload_fetch() {
    let dir = tempfile::tempdir().unwrap();
    let repo = dir.path().join("repo");
    fs::create_dir(&repo).unwrap();
    let tokens = dir.path().join("tokens.json");
    fs::write(&tokens, TOKENS).unwrap();

    let bad = dir.path().join("bad-tokens.json");
    fs::write(&bad, "[1, 2]").unwrap();
    let out = run(&["serve", "--repo-dir", p(&repo), "--tokens", p(&bad), "--port", "0"]);
    assert_eq!(code(&out), 3);
    let out = run(&["serve", "--repo-dir", "/no/such/repo", "--tokens", p(&tokens), "--port", "0"]);
    assert_eq!(code(&out), 3);

    let server = Server::start(&repo, &tokens);
    // The port is taken now.
    let port = server.url.rsplit(':').next().unwrap();
    let out = run(&["serve", "--repo-dir", p(&repo), "--tokens", p(&tokens), "--port", port]);
    assert_eq!(code(&out), 3);

    let http = reqwest::blocking::Client::new();
    let r = http.get(format!("{}/api/v1/catalog", server.url)).send().unwrap();
    assert_eq!(r.status().as_u16(), 401);

    let out = server::rvse()
        .args(["upload", &fixture("two_state.rvs.json"), "--server", &server.url])
        .env("RVSE_TOKEN", "c")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let receipt = stdout_json(&out);
    assert_eq!(receipt["version"], 1);

    let r = http.get(format!("{}/api/v1/scenarios/two-state/1", server.url)).bearer_auth("t").send().unwrap();
    assert_eq!(r.status().as_u16(), 200);
    let checksum = r.headers()["x-checksum-sha256"].to_str().unwrap().to_owned();
    let bytes = r.bytes().unwrap();
    assert_eq!(checksum, receipt["checksum"].as_str().unwrap());
    let local = rvse::scenario::parse_scenario(fs::read(fixture("two_state.rvs.json")).unwrap().as_slice()).unwrap();
    assert_eq!(bytes.as_ref(), rvse::scenario::canonical_serialize(&local).as_slice());

    // A learner token cannot upload; the client reports the refusal.
    let out = server::rvse()
        .args(["upload", &fixture("two_state.rvs.json"), "--server", &server.url, "--token", "l"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    assert_eq!(stdout_json(&out)["error"], "unauthorized");

    let logs = dir.path().join("logs");
    fs::create_dir(&logs).unwrap();
    let out = run(&["run", &fixture("two_state.rvs.json"), "--out", p(&logs.join("s1.events.jsonl")), "--session-id", "s1"]);
    assert_eq!(code(&out), 0);
    let ingest = |token: &str| {
        server::rvse().args(["ingest", p(&logs), "--server", &server.url, "--token", token]).output().unwrap()
    };
    let out = ingest("l");
    assert_eq!((code(&out), stdout_json(&out)["accepted"].clone()), (0, json!(5)));
    let out = ingest("l");
    assert_eq!((code(&out), stdout_json(&out)["accepted"].clone()), (0, json!(0)));
    assert_eq!(code(&ingest("t")), 1);

    let out = server::rvse().args(["alarms", "--server", &server.url, "--token", "c"]).output().unwrap();
    assert_eq!((code(&out), stdout_json(&out)), (0, json!([])));
    drop(server);

    let out = server::rvse().args(["alarms", "--server", "http://127.0.0.1:1", "--token", "c"]).output().unwrap();
    assert_eq!(code(&out), 3);
}
