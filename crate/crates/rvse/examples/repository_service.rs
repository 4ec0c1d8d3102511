//! Start the repository service in-process on an ephemeral port, then talk
//! to it over HTTP with the bundled client: upload, fetch, ingest, read a
//! dashboard and list alarms.
//!
//! cargo run -p rvse --example repository_service

use std::sync::Arc;

use rvse::analytics::DetectorConfig;
use rvse::client::ApiClient;
use rvse::engine::{replay, ActionScript, SessionInfo};
use rvse::fixtures;
use rvse::repository::{AppState, Store, TokenTable};

const TOKENS: &str = r#"{
    "c-token": {"name": "ada", "role": "creator"},
    "t-token": {"name": "tim", "role": "tutor"},
    "l-token": {"name": "lee", "role": "learner", "cohort_id": "ward-a"}
}"#;

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let state = AppState {
        store: Store::open(dir.path(), DetectorConfig::default()).unwrap(),
        tokens: TokenTable::from_json(TOKENS).unwrap(),
        log_requests: false,
    };
    let rt = tokio::runtime::Runtime::new().unwrap();
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let server = format!("http://{}", listener.local_addr().unwrap());
    rt.spawn(rvse::repository::serve(listener, state));

    let creator = ApiClient::new(&server, Some("c-token".into()));
    let r = creator.post("/scenarios", fixtures::SEPSIS.as_bytes().to_vec()).unwrap();
    println!("upload   {} {}", r.status, String::from_utf8_lossy(&r.body));
    let r = creator.post("/scenarios", fixtures::SEPSIS.as_bytes().to_vec()).unwrap();
    println!("again    {} {}", r.status, String::from_utf8_lossy(&r.body));

    let learner = ApiClient::new(&server, Some("l-token".into()));
    let r = learner.get("/catalog").unwrap();
    println!("catalog  {} {}", r.status, String::from_utf8_lossy(&r.body));
    let r = learner.get("/scenarios/sepsis-ward/2").unwrap();
    println!("fetch    {} {} bytes", r.status, r.body.len());

    // Play version 1 locally and ingest the log.
    let scenario = Arc::new(fixtures::load(fixtures::SEPSIS));
    let session = replay(scenario, &ActionScript::default(), SessionInfo::new("lee-1", "lee")).unwrap();
    let batch = serde_json::to_vec(&session.records()).unwrap();
    let r = learner.post("/sessions/lee-1/events", batch.clone()).unwrap();
    println!("ingest   {} {}", r.status, String::from_utf8_lossy(&r.body));
    let r = learner.post("/sessions/lee-1/events", batch).unwrap();
    println!("re-send  {} {}", r.status, String::from_utf8_lossy(&r.body));

    let r = learner.get("/dashboards/learner/lee").unwrap();
    println!("mine     {} {}", r.status, String::from_utf8_lossy(&r.body));
    let r = learner.get("/dashboards/cohort/ward-a").unwrap();
    println!("cohort   {} (learners may not)", r.status);
    let r = ApiClient::new(&server, Some("t-token".into())).get("/dashboards/cohort/ward-a").unwrap();
    println!("tutor    {} {} bytes", r.status, r.body.len());
    let r = creator.get("/alarms").unwrap();
    println!("alarms   {} {}", r.status, String::from_utf8_lossy(&r.body));
}
