//! Directory-backed persistence.
//!
//! ```text
//! <root>/index.json                          scenario owners, versions, session registry
//! <root>/alarms.json                         emitted alarms
//! <root>/scenarios/<id>/<version>.rvs.json   canonical scenario bytes
//! <root>/events/<session_id>.events.jsonl    ingested events
//! <root>/media/<scenario_id>/<path>          opaque media blobs
//! ```
//!
//! Scenario files are written once and never modified, so fetches read them
//! without locking. Everything that mutates the index goes through one lock.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use rvse_core::analytics::{
    aggregate_all, detect_troubles, learner_dashboard, summarize_session, Alarm, CohortDashboard,
    DetectorConfig, LearnerDashboard, SessionSummary,
};
use rvse_core::engine::{read_jsonl, EventKind, LogRecord};
use rvse_core::scenario::{
    canonical_serialize, checksum, is_safe_relative_path, is_url_safe, parse_scenario, validate,
    ParseError, ScenarioId, ValidationReport,
};

use crate::auth::Principal;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UploadReceipt {
    pub id: ScenarioId,
    pub version: u64,
    pub checksum: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: ScenarioId,
    pub version: u64,
    pub title: String,
    pub tags: Vec<String>,
    pub checksum: String,
    pub published_at: DateTime<Utc>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("scenario has validation errors")]
    ValidationFailed(ValidationReport),
    #[error("scenario {0} is owned by another creator")]
    NotOwner(ScenarioId),
    #[error("not found")]
    NotFound,
    #[error("unknown scenario {0} v{1}")]
    UnknownScenario(ScenarioId, u64),
    #[error("out of order: {0}")]
    OutOfOrder(String),
    #[error("bad batch: {0}")]
    BadBatch(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct Index {
    scenarios: BTreeMap<ScenarioId, ScenarioRecord>,
    sessions: BTreeMap<String, SessionRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ScenarioRecord {
    owner: String,
    versions: Vec<CatalogEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SessionRecord {
    learner_id: String,
    cohort_id: String,
    scenario_id: ScenarioId,
    scenario_version: u64,
}

struct Inner {
    index: Index,
    events: BTreeMap<String, Vec<LogRecord>>,
    summaries: BTreeMap<String, SessionSummary>,
    alarms: Vec<Alarm>,
}

pub struct Store {
    root: PathBuf,
    detector: DetectorConfig,
    inner: Mutex<Inner>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

fn read_json<T: for<'de> Deserialize<'de> + Default>(path: &Path) -> std::io::Result<T> {
    match fs::read(path) {
        Ok(bytes) => serde_json::from_slice(&bytes).map_err(std::io::Error::other),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(T::default()),
        Err(e) => Err(e),
    }
}

impl Store {
    /// Opens (or initializes) a repository directory, which must exist.
    /// Completed sessions are re-summarized from their event files.
    pub fn open(root: impl Into<PathBuf>, detector: DetectorConfig) -> Result<Self, StoreError> {
        let root = root.into();
        if !root.is_dir() {
            return Err(StoreError::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{} is not a directory", root.display()),
            )));
        }
        for sub in ["scenarios", "events", "media"] {
            fs::create_dir_all(root.join(sub))?;
        }
        let index: Index = read_json(&root.join("index.json"))?;
        let alarms: Vec<Alarm> = read_json(&root.join("alarms.json"))?;
        let mut inner = Inner { index, events: BTreeMap::new(), summaries: BTreeMap::new(), alarms };
        let ids: Vec<(String, String)> =
            inner.index.sessions.iter().map(|(k, v)| (k.clone(), v.cohort_id.clone())).collect();
        for (sid, cohort) in ids {
            let path = root.join("events").join(format!("{sid}.events.jsonl"));
            let text = match fs::read_to_string(&path) {
                Ok(t) => t,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
                Err(e) => return Err(e.into()),
            };
            let records = read_jsonl(&text).map_err(|e| StoreError::BadBatch(format!("{sid}: {e}")))?;
            if let Ok(s) = summarize_session(&records, &cohort) {
                inner.summaries.insert(sid.clone(), s);
            }
            inner.events.insert(sid, records);
        }
        Ok(Self { root, detector, inner: Mutex::new(inner) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn save_index(&self, index: &Index) -> std::io::Result<()> {
        let bytes = serde_json::to_vec_pretty(index).expect("index serializes");
        write_atomic(&self.root.join("index.json"), &bytes)
    }

    fn scenario_path(&self, id: &str, version: u64) -> PathBuf {
        self.root.join("scenarios").join(id).join(format!("{version}.rvs.json"))
    }

    /// Stores a new version. Any `version` in the document is replaced by the
    /// next free version for its id.
    pub fn upload(&self, owner: &str, document: &[u8]) -> Result<UploadReceipt, StoreError> {
        let mut value: Value = serde_json::from_slice(document)
            .map_err(|e| ParseError::MalformedDocument(e.to_string()))?;
        let Some(obj) = value.as_object_mut() else {
            return Err(ParseError::SchemaViolation { path: String::new(), message: "expected an object".into() }.into());
        };
        obj.insert("version".into(), Value::from(1u64));
        let probe = parse_scenario(value.to_string().as_bytes())?;
        let report = validate(&probe);
        if !report.is_deployable() {
            return Err(StoreError::ValidationFailed(report));
        }

        let mut inner = self.lock();
        if let Some(rec) = inner.index.scenarios.get(&probe.id) {
            if rec.owner != owner {
                return Err(StoreError::NotOwner(probe.id.clone()));
            }
        }
        let version = inner.index.scenarios.get(&probe.id).map_or(0, |r| r.versions.len() as u64) + 1;
        value["version"] = Value::from(version);
        let scenario = parse_scenario(value.to_string().as_bytes())?;
        let bytes = canonical_serialize(&scenario);
        let sum = checksum(&scenario);

        let path = self.scenario_path(scenario.id.as_str(), version);
        fs::create_dir_all(path.parent().expect("has parent"))?;
        write_atomic(&path, &bytes)?;

        let mut index = inner.index.clone();
        index
            .scenarios
            .entry(scenario.id.clone())
            .or_insert_with(|| ScenarioRecord { owner: owner.to_owned(), versions: Vec::new() })
            .versions
            .push(CatalogEntry {
                id: scenario.id.clone(),
                version,
                title: scenario.meta.title.as_str().to_owned(),
                tags: scenario.meta.tags.clone(),
                checksum: sum.clone(),
                published_at: Utc::now(),
            });
        self.save_index(&index)?;
        inner.index = index;
        Ok(UploadReceipt { id: scenario.id, version, checksum: sum })
    }

    /// Latest version of every scenario, ordered by id.
    pub fn catalog(&self) -> Vec<CatalogEntry> {
        let inner = self.lock();
        inner.index.scenarios.values().filter_map(|r| r.versions.last().cloned()).collect()
    }

    /// Stored canonical bytes of one version.
    pub fn fetch(&self, id: &str, version: u64) -> Result<Vec<u8>, StoreError> {
        if !is_url_safe(id) {
            return Err(StoreError::NotFound);
        }
        match fs::read(self.scenario_path(id, version)) {
            Ok(b) => Ok(b),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(StoreError::NotFound),
            Err(e) => Err(e.into()),
        }
    }

    /// Appends a batch of events to a session and returns how many were new.
    /// Records identical in `(t_ms, kind, payload)` to stored ones are
    /// skipped. Completing a session refreshes its summary and reruns the
    /// detectors for that scenario version.
    pub fn ingest(
        &self,
        session_id: &str,
        uploader: &Principal,
        batch: Vec<LogRecord>,
    ) -> Result<usize, StoreError> {
        if !is_url_safe(session_id) {
            return Err(StoreError::BadBatch("session id must be URL-safe".into()));
        }
        let Some(first) = batch.first() else { return Ok(0) };
        let (scenario_id, version) = (first.scenario_id.clone(), first.scenario_version);
        for (i, r) in batch.iter().enumerate() {
            if r.session_id != session_id {
                return Err(StoreError::BadBatch(format!("record {i} belongs to session {}", r.session_id)));
            }
            if r.scenario_id != scenario_id || r.scenario_version != version {
                return Err(StoreError::BadBatch(format!("record {i} cites another scenario version")));
            }
            r.event().map_err(|e| StoreError::BadBatch(format!("record {i}: {e}")))?;
            if i > 0 && r.t_ms < batch[i - 1].t_ms {
                return Err(StoreError::OutOfOrder(format!("record {i} goes back in time")));
            }
        }

        let mut inner = self.lock();
        let known = inner
            .index
            .scenarios
            .get(&scenario_id)
            .is_some_and(|r| r.versions.iter().any(|v| v.version == version));
        if !known {
            return Err(StoreError::UnknownScenario(scenario_id, version));
        }
        if let Some(rec) = inner.index.sessions.get(session_id) {
            if rec.scenario_id != scenario_id || rec.scenario_version != version {
                return Err(StoreError::BadBatch("session already recorded against another scenario".into()));
            }
        }

        let stored = inner.events.get(session_id).map(Vec::as_slice).unwrap_or_default();
        let seen: BTreeSet<String> = stored.iter().map(|r| r.to_line()).collect();
        let ended = stored.iter().any(|r| r.kind == EventKind::SessionEnd);
        let mut last_t = stored.last().map(|r| r.t_ms);
        let mut fresh: Vec<LogRecord> = Vec::new();
        let mut fresh_lines: BTreeSet<String> = BTreeSet::new();
        for r in batch {
            let line = r.to_line();
            if seen.contains(&line) || fresh_lines.contains(&line) {
                continue;
            }
            if ended || fresh.iter().any(|f| f.kind == EventKind::SessionEnd) {
                return Err(StoreError::OutOfOrder("events after session_end".into()));
            }
            if last_t.is_some_and(|t| r.t_ms < t) {
                return Err(StoreError::OutOfOrder(format!("t_ms {} precedes stored events", r.t_ms)));
            }
            if last_t.is_none() && fresh.is_empty() && r.kind != EventKind::SessionStart {
                return Err(StoreError::OutOfOrder("a session must begin with session_start".into()));
            }
            last_t = Some(r.t_ms);
            fresh_lines.insert(line);
            fresh.push(r);
        }
        if fresh.is_empty() {
            return Ok(0);
        }

        let mut index = None;
        if !inner.index.sessions.contains_key(session_id) {
            let learner_id = fresh[0].payload["learner_id"].as_str().unwrap_or_default().to_owned();
            let mut next = inner.index.clone();
            next.sessions.insert(
                session_id.to_owned(),
                SessionRecord {
                    learner_id,
                    cohort_id: uploader.cohort().to_owned(),
                    scenario_id: scenario_id.clone(),
                    scenario_version: version,
                },
            );
            index = Some(next);
        }

        let path = self.root.join("events").join(format!("{session_id}.events.jsonl"));
        let mut file = fs::OpenOptions::new().create(true).append(true).open(path)?;
        let mut text = String::new();
        for r in &fresh {
            text.push_str(&r.to_line());
            text.push('\n');
        }
        file.write_all(text.as_bytes())?;
        file.sync_data()?;
        if let Some(next) = index {
            self.save_index(&next)?;
            inner.index = next;
        }

        let n = fresh.len();
        let completes = fresh.iter().any(|r| r.kind == EventKind::SessionEnd);
        let events = inner.events.entry(session_id.to_owned()).or_default();
        events.extend(fresh);
        if completes {
            let cohort = inner.index.sessions[session_id].cohort_id.clone();
            match summarize_session(&inner.events[session_id], &cohort) {
                Ok(summary) => {
                    inner.summaries.insert(session_id.to_owned(), summary);
                    self.run_detectors(&mut inner, &scenario_id, version)?;
                }
                Err(e) => eprintln!("session {session_id}: not summarized: {e}"),
            }
        }
        Ok(n)
    }

    fn run_detectors(&self, inner: &mut Inner, id: &ScenarioId, version: u64) -> std::io::Result<()> {
        let summaries: Vec<SessionSummary> = inner
            .summaries
            .values()
            .filter(|s| s.scenario.id == *id && s.scenario.version == version)
            .cloned()
            .collect();
        let dashboards = aggregate_all(&summaries);
        let found = detect_troubles(&dashboards, &self.detector, Utc::now());
        let known: BTreeSet<_> = inner.alarms.iter().map(Alarm::key).collect();
        let fresh: Vec<Alarm> = found.into_iter().filter(|a| !known.contains(&a.key())).collect();
        if fresh.is_empty() {
            return Ok(());
        }
        let mut alarms = inner.alarms.clone();
        alarms.extend(fresh);
        let bytes = serde_json::to_vec_pretty(&alarms).expect("alarms serialize");
        write_atomic(&self.root.join("alarms.json"), &bytes)?;
        inner.alarms = alarms;
        Ok(())
    }

    /// Alarms on scenarios owned by `owner`, newest first.
    pub fn alarms_for(&self, owner: &str) -> Vec<Alarm> {
        let inner = self.lock();
        let mut out: Vec<Alarm> = inner
            .alarms
            .iter()
            .rev()
            .filter(|a| inner.index.scenarios.get(&a.scenario.id).is_some_and(|r| r.owner == owner))
            .cloned()
            .collect();
        out.sort_by(|a, b| b.emitted_at.cmp(&a.emitted_at));
        out
    }

    /// One dashboard per scenario version the cohort has completed sessions for.
    pub fn cohort_dashboards(&self, cohort_id: &str) -> Vec<CohortDashboard> {
        let inner = self.lock();
        let mine: Vec<SessionSummary> =
            inner.summaries.values().filter(|s| s.cohort_id == cohort_id).cloned().collect();
        aggregate_all(&mine)
    }

    pub fn learner_dashboard(&self, learner_id: &str) -> Option<LearnerDashboard> {
        let inner = self.lock();
        let mine: Vec<SessionSummary> =
            inner.summaries.values().filter(|s| s.learner_id == learner_id).cloned().collect();
        learner_dashboard(&mine).ok()
    }

    fn media_path(&self, scenario_id: &str, path: &str) -> Option<PathBuf> {
        (is_url_safe(scenario_id) && is_safe_relative_path(path))
            .then(|| self.root.join("media").join(scenario_id).join(path))
    }

    /// Stores a media blob. Only the owner may add media to an existing
    /// scenario; media may also be uploaded before the scenario itself.
    pub fn put_media(&self, owner: &str, scenario_id: &str, path: &str, bytes: &[u8]) -> Result<(), StoreError> {
        let target = self.media_path(scenario_id, path).ok_or(StoreError::NotFound)?;
        let inner = self.lock();
        if let Some(rec) = inner.index.scenarios.get(scenario_id) {
            if rec.owner != owner {
                return Err(StoreError::NotOwner(ScenarioId::new(scenario_id)));
            }
        }
        fs::create_dir_all(target.parent().expect("has parent"))?;
        write_atomic(&target, bytes)?;
        Ok(())
    }

    pub fn get_media(&self, scenario_id: &str, path: &str) -> Result<Vec<u8>, StoreError> {
        let target = self.media_path(scenario_id, path).ok_or(StoreError::NotFound)?;
        fs::read(target).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => StoreError::NotFound,
            _ => StoreError::Io(e),
        })
    }
}
