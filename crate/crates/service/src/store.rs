//! Directory-backed run records.
//!
//! ```text
//! <root>/index.jsonl             one line per status transition
//! <root>/runs/<id>/config.json   the posted configuration, canonical JSON
//! <root>/runs/<id>/record.json   the current RunRecord
//! <root>/runs/<id>/...           outputs, see `jobs::write_outcome`
//! <root>/comparisons/<id>/       comparison bundles
//! ```

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use percept_core::pipeline::ArtifactReport;
use percept_core::RunMode;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{ErrorBody, Result, ServiceError};
use crate::export::{read_json, write_atomic, write_json};
use crate::schema::canonical_json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl RunStatus {
    pub fn is_final(self) -> bool {
        matches!(self, RunStatus::Done | RunStatus::Failed)
    }

    /// Allowed moves: QUEUED to RUNNING, RUNNING to DONE or FAILED, and
    /// QUEUED to FAILED for runs that never start.
    pub fn can_become(self, next: RunStatus) -> bool {
        matches!(
            (self, next),
            (RunStatus::Queued, RunStatus::Running)
                | (RunStatus::Queued, RunStatus::Failed)
                | (RunStatus::Running, RunStatus::Done)
                | (RunStatus::Running, RunStatus::Failed)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    /// RFC 3339, UTC.
    pub created_at: String,
    pub mode: RunMode,
    /// The configuration exactly as posted.
    pub config: Value,
    pub status: RunStatus,
    /// Run directory relative to the store root, once outputs exist.
    pub result_location: Option<String>,
    pub error: Option<ErrorBody>,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
    pub report: Option<ArtifactReport>,
    /// Names accepted by the panel endpoint.
    #[serde(default)]
    pub panels: Vec<String>,
}

impl RunRecord {
    pub fn queued(run_id: String, mode: RunMode, config: Value) -> Self {
        Self {
            run_id,
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Micros, true),
            mode,
            config,
            status: RunStatus::Queued,
            result_location: None,
            error: None,
            metrics: BTreeMap::new(),
            report: None,
            panels: Vec::new(),
        }
    }
}

#[derive(Serialize)]
struct IndexLine<'a> {
    run_id: &'a str,
    status: RunStatus,
    at: String,
}

pub const RECORD_FILE: &str = "record.json";
pub const CONFIG_FILE: &str = "config.json";
pub const INDEX_FILE: &str = "index.jsonl";

/// Run ids become directory names, so they are restricted to a safe alphabet.
pub fn check_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(ServiceError::Schema(format!(
            "id {id:?} must be 1 to 128 characters from [A-Za-z0-9._-] not starting with '.'"
        )))
    }
}

pub struct Store {
    root: PathBuf,
    records: RwLock<BTreeMap<String, RunRecord>>,
    index: Mutex<()>,
}

impl Store {
    /// Opens or creates a store. Runs left unfinished by an earlier process
    /// are marked FAILED.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("runs"))?;
        fs::create_dir_all(root.join("comparisons"))?;
        let store = Self {
            root,
            records: RwLock::new(BTreeMap::new()),
            index: Mutex::new(()),
        };
        let mut loaded = Vec::new();
        for entry in fs::read_dir(store.root.join("runs"))? {
            let path = entry?.path().join(RECORD_FILE);
            if path.exists() {
                match read_json::<RunRecord>(&path) {
                    Ok(r) => loaded.push(r),
                    Err(e) => log::warn!("skipping unreadable record {}: {e}", path.display()),
                }
            }
        }
        for mut r in loaded {
            store.records.write().unwrap().insert(r.run_id.clone(), r.clone());
            if !r.status.is_final() {
                r.status = RunStatus::Failed;
                r.error = Some(ErrorBody {
                    kind: "interrupted".into(),
                    message: "the service stopped before the run finished".into(),
                    field: None,
                });
                store.publish(r)?;
            }
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_dir(&self, id: &str) -> PathBuf {
        self.root.join("runs").join(id)
    }

    pub fn comparison_dir(&self, id: &str) -> PathBuf {
        self.root.join("comparisons").join(id)
    }

    fn append_index(&self, record: &RunRecord) -> Result<()> {
        let _guard = self.index.lock().unwrap();
        let line = serde_json::to_string(&IndexLine {
            run_id: &record.run_id,
            status: record.status,
            at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Micros, true),
        })
        .map_err(|e| ServiceError::Internal(e.to_string()))?;
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.root.join(INDEX_FILE))?;
        writeln!(f, "{line}")?;
        Ok(())
    }

    fn publish(&self, record: RunRecord) -> Result<RunRecord> {
        write_json(&self.run_dir(&record.run_id).join(RECORD_FILE), &record)?;
        self.append_index(&record)?;
        self.records.write().unwrap().insert(record.run_id.clone(), record.clone());
        Ok(record)
    }

    /// Registers a new QUEUED run and stores its posted configuration.
    pub fn create(&self, record: RunRecord) -> Result<RunRecord> {
        check_id(&record.run_id)?;
        {
            let mut map = self.records.write().unwrap();
            if map.contains_key(&record.run_id) || self.run_dir(&record.run_id).exists() {
                return Err(ServiceError::Conflict(format!("run {} already exists", record.run_id)));
            }
            // reserve the id before touching the disk
            map.insert(record.run_id.clone(), record.clone());
        }
        let dir = self.run_dir(&record.run_id);
        let written = fs::create_dir_all(&dir)
            .map_err(ServiceError::from)
            .and_then(|_| write_atomic(&dir.join(CONFIG_FILE), canonical_json(&record.config).as_bytes()))
            .and_then(|_| self.publish(record.clone()));
        if written.is_err() {
            self.records.write().unwrap().remove(&record.run_id);
        }
        written
    }

    /// Moves a run to `next`, applying `update` to the stored record first.
    pub fn transition(&self, id: &str, next: RunStatus, update: impl FnOnce(&mut RunRecord)) -> Result<RunRecord> {
        let mut record = self.get(id).ok_or_else(|| ServiceError::NotFound(format!("unknown run {id}")))?;
        if !record.status.can_become(next) {
            return Err(ServiceError::Conflict(format!(
                "run {id} cannot move from {:?} to {next:?}",
                record.status
            )));
        }
        update(&mut record);
        record.status = next;
        record.run_id = id.to_string();
        self.publish(record)
    }

    pub fn get(&self, id: &str) -> Option<RunRecord> {
        self.records.read().unwrap().get(id).cloned()
    }

    /// Records ordered by creation time, then id.
    pub fn list(&self, limit: usize, offset: usize) -> (usize, Vec<RunRecord>) {
        let map = self.records.read().unwrap();
        let mut all: Vec<&RunRecord> = map.values().collect();
        all.sort_by(|a, b| (&a.created_at, &a.run_id).cmp(&(&b.created_at, &b.run_id)));
        let total = all.len();
        (total, all.into_iter().skip(offset).take(limit).cloned().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn record(id: &str) -> RunRecord {
        RunRecord::queued(id.into(), RunMode::NonStereo, json!({"schema_version": 1, "b": 2.5, "a": 1}))
    }

    #[test]
    fn status_moves_forward_only() {
        use RunStatus::*;
        assert!(Queued.can_become(Running));
        assert!(Running.can_become(Done));
        assert!(!Done.can_become(Running));
        assert!(!Failed.can_become(Done));
        assert!(!Running.can_become(Queued));
        assert!(!Done.can_become(Done));
    }

    #[test]
    fn lifecycle_is_persisted_and_indexed() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        store.create(record("a")).unwrap();
        assert!(matches!(store.create(record("a")), Err(ServiceError::Conflict(_))));
        store.transition("a", RunStatus::Running, |_| {}).unwrap();
        store
            .transition("a", RunStatus::Done, |r| {
                r.metrics.insert("x".into(), 1.0);
            })
            .unwrap();
        assert!(matches!(store.transition("a", RunStatus::Failed, |_| {}), Err(ServiceError::Conflict(_))));
        let config = fs::read_to_string(store.run_dir("a").join(CONFIG_FILE)).unwrap();
        assert_eq!(config, r#"{"a":1,"b":2.5,"schema_version":1}"#);
        let index = fs::read_to_string(dir.path().join(INDEX_FILE)).unwrap();
        assert_eq!(index.lines().count(), 3);

        let reopened = Store::open(dir.path()).unwrap();
        let r = reopened.get("a").unwrap();
        assert_eq!(r.status, RunStatus::Done);
        assert_eq!(r.metrics["x"], 1.0);
    }

    #[test]
    fn unfinished_runs_fail_on_reopen() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = Store::open(dir.path()).unwrap();
            store.create(record("b")).unwrap();
        }
        let store = Store::open(dir.path()).unwrap();
        let r = store.get("b").unwrap();
        assert_eq!(r.status, RunStatus::Failed);
        assert_eq!(r.error.unwrap().kind, "interrupted");
    }

    #[test]
    fn listing_pages_in_creation_order() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        for id in ["r1", "r2", "r3"] {
            store.create(record(id)).unwrap();
        }
        let (total, page) = store.list(2, 1);
        assert_eq!(total, 3);
        let ids: Vec<&str> = page.iter().map(|r| r.run_id.as_str()).collect();
        assert_eq!(ids, ["r2", "r3"]);
    }

    #[test]
    fn unsafe_ids_are_rejected() {
        for bad in ["", "../x", ".hidden", "a/b", "a b"] {
            assert!(check_id(bad).is_err(), "{bad}");
        }
        check_id("run-0123_ab.c").unwrap();
    }
}
