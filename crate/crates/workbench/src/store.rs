//! Flat-file experiment store.
//!
//! ```text
//! <root>/<id>/record.json       experiment record, replaced atomically
//! <root>/<id>/history.jsonl     append-only optimizer history
//! <root>/<id>/validation.json   validation report, replaced atomically
//! <root>/<id>/validation.jsonl  one line per validation rollout
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use firesmac_core::mdp::{Constituency, ConstituencyWeights};
use firesmac_core::policy::PolicyParams;
use firesmac_core::smac::io::HistoryLine;
use firesmac_core::smac::HistoryEntry;
use serde::{Deserialize, Serialize};

use crate::validation::{RolloutLine, ValidationReport};
use crate::WorkbenchError;

pub const RECORD_FILE: &str = "record.json";
pub const HISTORY_FILE: &str = "history.jsonl";
pub const VALIDATION_FILE: &str = "validation.json";
pub const VALIDATION_LINES_FILE: &str = "validation.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pending,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incumbent {
    pub theta: PolicyParams,
    /// Surrogate estimate of the policy's value.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub id: String,
    /// Preset the weights came from, if any.
    pub constituency: Option<Constituency>,
    pub weights: ConstituencyWeights,
    pub seed: u64,
    pub budget: usize,
    pub status: Status,
    pub incumbent: Option<Incumbent>,
    /// History file name, relative to the experiment directory.
    pub history_path: String,
    /// Number of history entries written so far.
    pub evaluations: usize,
    pub error: Option<String>,
    pub validation_status: Option<Status>,
    /// Real-simulator returns of the incumbent, once validated.
    pub validation: Option<Vec<f64>>,
    pub validation_error: Option<String>,
}

impl ExperimentRecord {
    pub fn new(
        constituency: Option<Constituency>,
        weights: ConstituencyWeights,
        seed: u64,
        budget: usize,
    ) -> Self {
        Self {
            id: uuid::Uuid::new_v4().simple().to_string(),
            constituency,
            weights,
            seed,
            budget,
            status: Status::Pending,
            incumbent: None,
            history_path: HISTORY_FILE.into(),
            evaluations: 0,
            error: None,
            validation_status: None,
            validation: None,
            validation_error: None,
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.status != Status::Done || self.incumbent.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentStore {
    root: PathBuf,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-')
}

/// Write through a temporary file and rename over the target.
fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

impl ExperimentStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, WorkbenchError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dir(&self, id: &str) -> Result<PathBuf, WorkbenchError> {
        if !valid_id(id) {
            return Err(WorkbenchError::NotFound(id.to_string()));
        }
        Ok(self.root.join(id))
    }

    pub fn history_file(&self, id: &str) -> Result<PathBuf, WorkbenchError> {
        Ok(self.dir(id)?.join(HISTORY_FILE))
    }

    pub fn create(&self, record: &ExperimentRecord) -> Result<(), WorkbenchError> {
        let dir = self.dir(&record.id)?;
        fs::create_dir(&dir)?;
        File::create(dir.join(HISTORY_FILE))?;
        self.save(record)
    }

    pub fn save(&self, record: &ExperimentRecord) -> Result<(), WorkbenchError> {
        debug_assert!(record.is_consistent());
        let bytes = serde_json::to_vec_pretty(record)?;
        write_atomic(&self.dir(&record.id)?.join(RECORD_FILE), &bytes)?;
        Ok(())
    }

    pub fn load(&self, id: &str) -> Result<ExperimentRecord, WorkbenchError> {
        let path = self.dir(id)?.join(RECORD_FILE);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(WorkbenchError::NotFound(id.to_string()))
            }
            Err(e) => return Err(e.into()),
        };
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Load, modify and save a record.
    pub fn update(
        &self,
        id: &str,
        f: impl FnOnce(&mut ExperimentRecord),
    ) -> Result<ExperimentRecord, WorkbenchError> {
        let mut record = self.load(id)?;
        f(&mut record);
        self.save(&record)?;
        Ok(record)
    }

    /// All records, sorted by id.
    pub fn list(&self) -> Result<Vec<ExperimentRecord>, WorkbenchError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if entry.file_type()?.is_dir() && valid_id(&name) && entry.path().join(RECORD_FILE).exists() {
                out.push(self.load(&name)?);
            }
        }
        out.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(out)
    }

    /// Mark work interrupted by a previous process exit as failed.
    pub fn recover(&self) -> Result<usize, WorkbenchError> {
        let mut n = 0;
        for record in self.list()? {
            let stale = matches!(record.status, Status::Pending | Status::Running);
            let stale_validation =
                matches!(record.validation_status, Some(Status::Pending | Status::Running));
            if stale || stale_validation {
                self.update(&record.id, |r| {
                    if stale {
                        r.status = Status::Failed;
                        r.error = Some("interrupted by service restart".into());
                    }
                    if stale_validation {
                        r.validation_status = Some(Status::Failed);
                        r.validation_error = Some("interrupted by service restart".into());
                    }
                })?;
                n += 1;
            }
        }
        Ok(n)
    }

    /// Open the history file for appending.
    pub fn history_writer(&self, id: &str) -> Result<HistoryWriter, WorkbenchError> {
        let file = OpenOptions::new().create(true).truncate(true).write(true).open(self.history_file(id)?)?;
        Ok(HistoryWriter { out: BufWriter::new(file) })
    }

    /// History lines from index `since` on. Only complete lines are
    /// returned, so reading during a write never sees a torn record.
    pub fn read_history(&self, id: &str, since: usize) -> Result<Vec<HistoryLine>, WorkbenchError> {
        let path = self.history_file(id)?;
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(WorkbenchError::NotFound(id.to_string()))
            }
            Err(e) => return Err(e.into()),
        };
        let complete = match text.rfind('\n') {
            Some(end) => &text[..=end],
            None => "",
        };
        complete
            .lines()
            .filter(|l| !l.trim().is_empty())
            .skip(since)
            .map(|l| serde_json::from_str(l).map_err(WorkbenchError::from))
            .collect()
    }

    pub fn save_validation(
        &self,
        id: &str,
        report: &ValidationReport,
        lines: &[RolloutLine],
    ) -> Result<(), WorkbenchError> {
        let dir = self.dir(id)?;
        let mut text = Vec::new();
        for l in lines {
            serde_json::to_writer(&mut text, l)?;
            text.push(b'\n');
        }
        write_atomic(&dir.join(VALIDATION_LINES_FILE), &text)?;
        write_atomic(&dir.join(VALIDATION_FILE), &serde_json::to_vec_pretty(report)?)?;
        Ok(())
    }

    pub fn load_validation(&self, id: &str) -> Result<Option<ValidationReport>, WorkbenchError> {
        let path = self.dir(id)?.join(VALIDATION_FILE);
        match fs::read(&path) {
            Ok(b) => Ok(Some(serde_json::from_slice(&b)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}

pub struct HistoryWriter {
    out: BufWriter<File>,
}

impl HistoryWriter {
    /// Append entries and flush, so pollers see whole batches.
    pub fn append(&mut self, entries: &[HistoryEntry], wall_time: f64) -> std::io::Result<()> {
        firesmac_core::smac::io::write_history_lines(&mut self.out, entries, wall_time)?;
        self.out.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use firesmac_core::smac::Origin;

    fn record() -> ExperimentRecord {
        ExperimentRecord::new(Some(Constituency::Timber), Constituency::Timber.weights(), 3, 20)
    }

    #[test]
    fn create_load_update_list() {
        let tmp = tempfile::tempdir().unwrap();
        let store = ExperimentStore::open(tmp.path()).unwrap();
        let a = record();
        store.create(&a).unwrap();
        assert_eq!(store.load(&a.id).unwrap(), a);
        let b = store.update(&a.id, |r| r.status = Status::Running).unwrap();
        assert_eq!(store.load(&a.id).unwrap().status, Status::Running);
        let c = record();
        store.create(&c).unwrap();
        let ids: Vec<String> = store.list().unwrap().into_iter().map(|r| r.id).collect();
        let mut expected = vec![b.id, c.id];
        expected.sort();
        assert_eq!(ids, expected);
    }

    #[test]
    fn unknown_and_malicious_ids() {
        let tmp = tempfile::tempdir().unwrap();
        let store = ExperimentStore::open(tmp.path()).unwrap();
        assert!(matches!(store.load("nope"), Err(WorkbenchError::NotFound(_))));
        assert!(matches!(store.load("../etc"), Err(WorkbenchError::NotFound(_))));
        assert!(matches!(store.read_history("a/b", 0), Err(WorkbenchError::NotFound(_))));
    }

    #[test]
    fn history_reads_skip_torn_lines() {
        let tmp = tempfile::tempdir().unwrap();
        let store = ExperimentStore::open(tmp.path()).unwrap();
        let r = record();
        store.create(&r).unwrap();
        let mut w = store.history_writer(&r.id).unwrap();
        let e = |v: f64| HistoryEntry { theta: vec![v; 2], value: v, origin: Origin::Initial, iteration: 0 };
        w.append(&[e(1.0), e(2.0)], 0.1).unwrap();
        w.append(&[e(3.0)], 0.2).unwrap();
        let mut f = OpenOptions::new().append(true).open(store.history_file(&r.id).unwrap()).unwrap();
        f.write_all(b"{\"iteration\":1,\"ori").unwrap();
        let all = store.read_history(&r.id, 0).unwrap();
        assert_eq!(all.iter().map(|l| l.value).collect::<Vec<_>>(), vec![1.0, 2.0, 3.0]);
        assert_eq!(store.read_history(&r.id, 2).unwrap().len(), 1);
        assert!(store.read_history(&r.id, 9).unwrap().is_empty());
    }

    #[test]
    fn recover_marks_interrupted_runs() {
        let tmp = tempfile::tempdir().unwrap();
        let store = ExperimentStore::open(tmp.path()).unwrap();
        let mut r = record();
        r.status = Status::Running;
        store.create(&r).unwrap();
        let reopened = ExperimentStore::open(tmp.path()).unwrap();
        assert_eq!(reopened.recover().unwrap(), 1);
        let back = reopened.load(&r.id).unwrap();
        assert_eq!(back.status, Status::Failed);
        assert!(back.error.is_some());
        assert_eq!(reopened.recover().unwrap(), 0);
    }
}
