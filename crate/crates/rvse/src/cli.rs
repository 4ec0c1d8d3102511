//! The `rvse` command line.
//!
//! Every subcommand prints one JSON document on stdout and diagnostics on
//! stderr. Exit codes: 0 success, 1 validation errors or alarms, 2 usage
//! error, 3 I/O or network error.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::Utc;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use rvse_core::analytics::{
    aggregate_all, detect_troubles, learner_dashboard, summarize_session, DetectorConfig, SessionSummary,
};
use rvse_core::engine::{read_jsonl, replay, write_jsonl, ActionScript, EngineError, SessionInfo};
use rvse_core::scenario::{parse_scenario, validate, ParseError, Scenario};
use rvse_core::synth::{synth_cohort, Profile, SynthError};
use rvse_repository::{AppState, Store, TokenTable, DEFAULT_COHORT};

use crate::client::ApiClient;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    Findings,
    Usage,
    Io,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::Findings => 1,
            ExitStatus::Usage => 2,
            ExitStatus::Io => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "rvse", version, about = "Author, replay, serve and analyze rapid virtual simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate a scenario document and print the report.
    Validate {
        /// Scenario file (`.rvs.json`).
        path: PathBuf,
    },
    /// Replay an action script headlessly and write the event log.
    Run(RunArgs),
    /// Run the repository HTTP service.
    Serve(ServeArgs),
    /// Build dashboards and alarms from a directory of event logs.
    Analyze(AnalyzeArgs),
    /// Generate synthetic learner sessions.
    Synth(SynthArgs),
    /// Upload a scenario to a running repository.
    Upload(UploadArgs),
    /// Send event logs to a running repository.
    Ingest(IngestArgs),
    /// List alarms for the creator behind the token.
    Alarms(ClientArgs),
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Scenario file.
    pub scenario: PathBuf,
    /// Action script: a JSON array of `{"t_ms", "action_id"}`, optionally
    /// ending with `{"final_t_ms"}`. Without it no actions are taken.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Where to write the `.events.jsonl` log.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "run-1")]
    pub session_id: String,
    #[arg(long, default_value = "learner")]
    pub learner_id: String,
    #[arg(long, default_value = DEFAULT_COHORT)]
    pub cohort: String,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    pub repo_dir: PathBuf,
    /// Port to listen on; 0 picks a free one (printed on stdout).
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
    /// JSON object mapping bearer token to `{name, role, cohort_id?}`.
    #[arg(long)]
    pub tokens: PathBuf,
    /// Detector thresholds (JSON); defaults apply to missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Directory of `.events.jsonl` files.
    #[arg(long)]
    pub events: PathBuf,
    /// JSON object mapping session id or learner id to cohort id.
    #[arg(long)]
    pub cohorts: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// `competent`, `weak`, `confused_at:<state>` or `untaught:<action>`.
    #[arg(long)]
    pub profile: Profile,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ClientArgs {
    #[arg(long, env = "RVSE_SERVER", default_value = "http://127.0.0.1:8080")]
    pub server: String,
    #[arg(long, env = "RVSE_TOKEN", hide_env_values = true)]
    pub token: String,
}

#[derive(Args, Debug)]
pub struct UploadArgs {
    pub path: PathBuf,
    #[command(flatten)]
    pub client: ClientArgs,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Event-log files or directories containing them.
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    #[command(flatten)]
    pub client: ClientArgs,
}

type Outcome = (ExitStatus, Value);

fn fail(status: ExitStatus, msg: impl std::fmt::Display) -> Outcome {
    eprintln!("rvse: {msg}");
    (status, json!({ "error": msg.to_string() }))
}

fn read(path: &Path) -> Result<Vec<u8>, Outcome> {
    fs::read(path).map_err(|e| fail(ExitStatus::Io, format!("{}: {e}", path.display())))
}

fn parse_error_json(e: &ParseError) -> Value {
    match e {
        ParseError::MalformedDocument(d) => json!({ "error": "malformed_document", "detail": d }),
        ParseError::SchemaViolation { path, message } => {
            json!({ "error": "schema_violation", "path": path, "detail": message })
        }
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, Outcome> {
    let bytes = read(path)?;
    parse_scenario(&bytes).map_err(|e| {
        eprintln!("rvse: {}: {e}", path.display());
        (ExitStatus::Findings, parse_error_json(&e))
    })
}

fn load_config(path: Option<&Path>) -> Result<DetectorConfig, Outcome> {
    let Some(path) = path else { return Ok(DetectorConfig::default()) };
    let bytes = read(path)?;
    serde_json::from_slice::<DetectorConfig>(&bytes)
        .map_err(|e| e.to_string())
        .and_then(|c| c.validated().map_err(|e| e.to_string()))
        .map_err(|e| fail(ExitStatus::Usage, format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Outcome> {
    fs::write(path, bytes).map_err(|e| fail(ExitStatus::Io, format!("{}: {e}", path.display())))
}

/// Runs one parsed command, writing its JSON result to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> ExitStatus {
    let (status, value) = match cli.command {
        Command::Validate { path } => cmd_validate(&path),
        Command::Run(a) => cmd_run(&a),
        Command::Serve(a) => cmd_serve(&a, out),
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Upload(a) => cmd_upload(&a),
        Command::Ingest(a) => cmd_ingest(&a),
        Command::Alarms(a) => cmd_alarms(&a),
    }
    .unwrap_or_else(|e| e);
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&value).expect("JSON values serialize"));
    let _ = out.flush();
    status
}

fn cmd_validate(path: &Path) -> Result<Outcome, Outcome> {
    let scenario = load_scenario(path)?;
    let report = validate(&scenario);
    let status = if report.is_deployable() { ExitStatus::Success } else { ExitStatus::Findings };
    Ok((status, serde_json::to_value(&report).expect("report serializes")))
}

fn cmd_run(a: &RunArgs) -> Result<Outcome, Outcome> {
    let scenario = load_scenario(&a.scenario)?;
    let script = match &a.script {
        Some(p) => ActionScript::parse(&read(p)?)
            .map_err(|e| fail(ExitStatus::Findings, format!("{}: {e}", p.display())))?,
        None => ActionScript::default(),
    };
    let info = SessionInfo::new(&a.session_id, &a.learner_id);
    let session = match replay(Arc::new(scenario), &script, info) {
        Ok(s) => s,
        Err(EngineError::InvalidScenario(report)) => {
            eprintln!("rvse: scenario has validation errors");
            return Err((ExitStatus::Findings, serde_json::to_value(&report).expect("report serializes")));
        }
        Err(e) => return Err(fail(ExitStatus::Findings, e)),
    };
    let records = session.records();
    write_file(&a.out, write_jsonl(&records).as_bytes())?;
    let summary = summarize_session(&records, &a.cohort).map_err(|e| fail(ExitStatus::Findings, e))?;
    Ok((ExitStatus::Success, serde_json::to_value(summary).expect("summary serializes")))
}

fn cmd_synth(a: &SynthArgs) -> Result<Outcome, Outcome> {
    let scenario = load_scenario(&a.scenario)?;
    let sessions = match synth_cohort(Arc::new(scenario), &a.profile, a.n as usize, a.seed) {
        Ok(s) => s,
        Err(SynthError::Engine(EngineError::InvalidScenario(report))) => {
            eprintln!("rvse: scenario has validation errors");
            return Err((ExitStatus::Findings, serde_json::to_value(&report).expect("report serializes")));
        }
        Err(e) => return Err(fail(ExitStatus::Usage, e)),
    };
    fs::create_dir_all(&a.out).map_err(|e| fail(ExitStatus::Io, format!("{}: {e}", a.out.display())))?;
    let mut files = Vec::new();
    for s in &sessions {
        let name = format!("{}.events.jsonl", s.session_id());
        write_file(&a.out.join(&name), write_jsonl(&s.records()).as_bytes())?;
        files.push(name);
    }
    Ok((ExitStatus::Success, json!({ "profile": a.profile.to_string(), "sessions": files.len(), "files": files })))
}

/// Event-log files directly inside `dir`, sorted by name.
fn event_files(dir: &Path) -> Result<Vec<PathBuf>, Outcome> {
    let entries = fs::read_dir(dir).map_err(|e| fail(ExitStatus::Io, format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.to_string_lossy().ends_with(".events.jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

fn file_safe(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<Outcome, Outcome> {
    let files = event_files(&a.events)?;
    if files.is_empty() {
        return Err(fail(ExitStatus::Io, format!("{}: no .events.jsonl files", a.events.display())));
    }
    let cohorts: BTreeMap<String, String> = match &a.cohorts {
        Some(p) => serde_json::from_slice(&read(p)?)
            .map_err(|e| fail(ExitStatus::Usage, format!("{}: {e}", p.display())))?,
        None => BTreeMap::new(),
    };
    let cfg = load_config(a.config.as_deref())?;

    let mut summaries: Vec<SessionSummary> = Vec::new();
    let mut corrupt = Vec::new();
    for f in &files {
        let text = String::from_utf8(read(f)?).map_err(|e| e.to_string());
        let result = text.and_then(|t| read_jsonl(&t).map_err(|e| e.to_string())).and_then(|records| {
            let first = records.first().ok_or("empty log")?;
            let learner = first.payload["learner_id"].as_str().unwrap_or_default();
            let cohort = cohorts
                .get(&first.session_id)
                .or_else(|| cohorts.get(learner))
                .map_or(DEFAULT_COHORT, String::as_str);
            summarize_session(&records, cohort).map_err(|e| e.to_string())
        });
        match result {
            Ok(s) => summaries.push(s),
            Err(e) => {
                eprintln!("rvse: {}: {e}", f.display());
                corrupt.push(json!({ "file": f.display().to_string(), "error": e }));
            }
        }
    }

    fs::create_dir_all(&a.out).map_err(|e| fail(ExitStatus::Io, format!("{}: {e}", a.out.display())))?;
    let mut by_learner: BTreeMap<&str, Vec<SessionSummary>> = BTreeMap::new();
    for s in &summaries {
        by_learner.entry(&s.learner_id).or_default().push(s.clone());
    }
    let mut learner_files = Vec::new();
    for (learner, mine) in by_learner {
        let d = learner_dashboard(&mine).expect("grouped by learner, non-empty");
        let name = format!("learner-{}.json", file_safe(learner));
        write_file(&a.out.join(&name), &serde_json::to_vec_pretty(&d).expect("serializes"))?;
        learner_files.push(name);
    }
    let dashboards = aggregate_all(&summaries);
    let mut cohort_files = Vec::new();
    for d in &dashboards {
        let name = format!("cohort-{}-{}-v{}.json", file_safe(&d.cohort_id), d.scenario.id, d.scenario.version);
        write_file(&a.out.join(&name), &serde_json::to_vec_pretty(d).expect("serializes"))?;
        cohort_files.push(name);
    }
    let alarms = detect_troubles(&dashboards, &cfg, Utc::now());
    write_file(&a.out.join("alarms.json"), &serde_json::to_vec_pretty(&alarms).expect("serializes"))?;

    let status = if alarms.is_empty() { ExitStatus::Success } else { ExitStatus::Findings };
    Ok((
        status,
        json!({
            "sessions": summaries.len(),
            "corrupt": corrupt,
            "learner_dashboards": learner_files,
            "cohort_dashboards": cohort_files,
            "alarms": alarms,
        }),
    ))
}

fn cmd_serve(a: &ServeArgs, out: &mut dyn Write) -> Result<Outcome, Outcome> {
    let tokens = TokenTable::load(&a.tokens).map_err(|e| fail(ExitStatus::Io, format!("{}: {e}", a.tokens.display())))?;
    let cfg = load_config(a.config.as_deref())?;
    let store = Store::open(&a.repo_dir, cfg).map_err(|e| fail(ExitStatus::Io, format!("{}: {e}", a.repo_dir.display())))?;
    let listener = TcpListener::bind((a.bind.as_str(), a.port))
        .and_then(|l| l.set_nonblocking(true).map(|_| l))
        .map_err(|e| fail(ExitStatus::Io, format!("cannot listen on {}:{}: {e}", a.bind, a.port)))?;
    let addr = listener.local_addr().map_err(|e| fail(ExitStatus::Io, e))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| fail(ExitStatus::Io, e))?;

    let _ = writeln!(out, "{}", json!({ "listening": addr.to_string() }));
    let _ = out.flush();
    eprintln!("rvse: serving {} on http://{addr}", a.repo_dir.display());

    let state = AppState { store, tokens, log_requests: true };
    runtime
        .block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener)?;
            rvse_repository::serve(listener, state).await
        })
        .map_err(|e| fail(ExitStatus::Io, e))?;
    Ok((ExitStatus::Success, json!({ "stopped": addr.to_string() })))
}

fn response_outcome(resp: crate::client::Response) -> Outcome {
    let status = if resp.is_success() { ExitStatus::Success } else { ExitStatus::Findings };
    if !resp.is_success() {
        eprintln!("rvse: server answered {}", resp.status);
    }
    (status, resp.json())
}

fn cmd_upload(a: &UploadArgs) -> Result<Outcome, Outcome> {
    let body = read(&a.path)?;
    let client = ApiClient::new(&a.client.server, Some(a.client.token.clone()));
    let resp = client.post("/scenarios", body).map_err(|e| fail(ExitStatus::Io, e))?;
    Ok(response_outcome(resp))
}

fn cmd_alarms(a: &ClientArgs) -> Result<Outcome, Outcome> {
    let client = ApiClient::new(&a.server, Some(a.token.clone()));
    let resp = client.get("/alarms").map_err(|e| fail(ExitStatus::Io, e))?;
    let (status, value) = response_outcome(resp);
    let found = value.as_array().is_some_and(|v| !v.is_empty());
    Ok((if status == ExitStatus::Success && found { ExitStatus::Findings } else { status }, value))
}

fn cmd_ingest(a: &IngestArgs) -> Result<Outcome, Outcome> {
    let mut files = Vec::new();
    for p in &a.paths {
        if p.is_dir() {
            files.extend(event_files(p)?);
        } else {
            files.push(p.clone());
        }
    }
    let client = ApiClient::new(&a.client.server, Some(a.client.token.clone()));
    let mut accepted = 0u64;
    let mut rejected = Vec::new();
    for f in &files {
        let text = String::from_utf8_lossy(&read(f)?).into_owned();
        let records = match read_jsonl(&text) {
            Ok(r) if !r.is_empty() => r,
            Ok(_) => continue,
            Err(e) => {
                eprintln!("rvse: {}: {e}", f.display());
                rejected.push(json!({ "file": f.display().to_string(), "error": e.to_string() }));
                continue;
            }
        };
        let path = format!("/sessions/{}/events", records[0].session_id);
        let body = serde_json::to_vec(&records).expect("records serialize");
        let resp = client.post(&path, body).map_err(|e| fail(ExitStatus::Io, e))?;
        if resp.is_success() {
            accepted += resp.json()["accepted"].as_u64().unwrap_or(0);
        } else {
            eprintln!("rvse: {}: server answered {}", f.display(), resp.status);
            rejected.push(json!({ "file": f.display().to_string(), "status": resp.status, "error": resp.json() }));
        }
    }
    let status = if rejected.is_empty() { ExitStatus::Success } else { ExitStatus::Findings };
    Ok((status, json!({ "files": files.len(), "accepted": accepted, "rejected": rejected })))
}
