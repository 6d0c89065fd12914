//! Directory-backed run store.
//!
//! | file               | content                                              |
//! |--------------------|------------------------------------------------------|
//! | `runs.jsonl`       | one [`RunRecord`] per line, append-only              |
//! | `measures.jsonl`   | one [`MeasureEntry`] per line, append-only; later lines win |
//! | `config.toml`      | the resolved sweep config the runs were trained with |
//! | `store.lock`       | present while a writer holds the store               |
//!
//! A trailing line that fails to parse (an interrupted append) is moved to
//! `<file>.quarantine` and cut from the log when the store is opened for
//! writing; read-only loads skip it with a warning.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::SweepConfig;
use crate::error::{Error, Result};
use crate::measures::MeasureValue;
use crate::sandbox::RunRecord;

pub const RUNS_FILE: &str = "runs.jsonl";
pub const MEASURES_FILE: &str = "measures.jsonl";
pub const CONFIG_FILE: &str = "config.toml";
pub const LOCK_FILE: &str = "store.lock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureEntry {
    pub run_id: String,
    /// Milliseconds since the Unix epoch.
    pub computed_at: u64,
    #[serde(flatten)]
    pub value: MeasureValue,
}

pub fn now_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

struct LockGuard(PathBuf);

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Exclusive writer handle on a store directory.
pub struct Store {
    dir: PathBuf,
    ids: HashSet<String>,
    runs: BufWriter<File>,
    measures: BufWriter<File>,
    _lock: LockGuard,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("dir", &self.dir).field("runs", &self.ids.len()).finish()
    }
}

fn read_lines<T: DeserializeOwned>(path: &Path, repair: bool) -> Result<Vec<T>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    let mut offset = 0usize;
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    for (i, raw) in lines.iter().enumerate() {
        let line = raw.trim_end_matches('\n');
        if line.trim().is_empty() {
            offset += raw.len();
            continue;
        }
        match serde_json::from_str::<T>(line) {
            Ok(v) => out.push(v),
            Err(e) if i + 1 == lines.len() => {
                log::warn!("{}: unreadable trailing line {} ({e}); quarantined", path.display(), i + 1);
                if repair {
                    let mut q = path.as_os_str().to_owned();
                    q.push(".quarantine");
                    let mut qf = OpenOptions::new().create(true).append(true).open(PathBuf::from(q))?;
                    qf.write_all(line.as_bytes())?;
                    qf.write_all(b"\n")?;
                    let f = OpenOptions::new().write(true).open(path)?;
                    f.set_len(offset as u64)?;
                }
                break;
            }
            Err(e) => return Err(Error::Corrupt { line: i + 1, msg: e.to_string() }),
        }
        offset += raw.len();
    }
    Ok(out)
}

fn append_handle(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(OpenOptions::new().create(true).append(true).open(path)?))
}

/// Run records with the measure log merged in, without taking the lock.
pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    load_with(dir, false)
}

fn load_with(dir: &Path, repair: bool) -> Result<Vec<RunRecord>> {
    if !dir.is_dir() {
        return Err(Error::Config(format!("store {} does not exist", dir.display())));
    }
    let mut records: Vec<RunRecord> = read_lines(&dir.join(RUNS_FILE), repair)?;
    let entries: Vec<MeasureEntry> = read_lines(&dir.join(MEASURES_FILE), repair)?;
    let mut by_run: BTreeMap<String, BTreeMap<String, MeasureValue>> = BTreeMap::new();
    for e in entries {
        by_run.entry(e.run_id).or_default().insert(e.value.name.clone(), e.value);
    }
    for r in &mut records {
        if let Some(m) = by_run.remove(&r.run_id) {
            r.measure_values.extend(m);
        }
    }
    Ok(records)
}

/// Raw measure log entries, in append order.
pub fn load_measure_log(dir: &Path) -> Result<Vec<MeasureEntry>> {
    read_lines(&dir.join(MEASURES_FILE), false)
}

pub fn load_config(dir: &Path) -> Result<SweepConfig> {
    let text = fs::read_to_string(dir.join(CONFIG_FILE))
        .map_err(|e| Error::Config(format!("store {} has no readable {CONFIG_FILE}: {e}", dir.display())))?;
    SweepConfig::from_toml_str(&text)
}

impl Store {
    /// Lock `dir` (creating it if needed) for writing. Fails with
    /// `StoreLocked` if another writer holds it.
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let lock_path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock_path) {
            Ok(mut f) => writeln!(f, "{}", std::process::id())?,
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                return Err(Error::StoreLocked(format!("{} exists; another writer is active", lock_path.display())))
            }
            Err(e) => return Err(e.into()),
        }
        let lock = LockGuard(lock_path);
        let records = load_with(dir, true)?;
        let ids = records.into_iter().map(|r| r.run_id).collect();
        Ok(Self {
            dir: dir.to_path_buf(),
            ids,
            runs: append_handle(&dir.join(RUNS_FILE))?,
            measures: append_handle(&dir.join(MEASURES_FILE))?,
            _lock: lock,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn contains(&self, run_id: &str) -> bool {
        self.ids.contains(run_id)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn records(&self) -> Result<Vec<RunRecord>> {
        load_records(&self.dir)
    }

    /// Append one record. A run id already in the store is rejected.
    pub fn persist(&mut self, record: &RunRecord) -> Result<()> {
        if self.ids.contains(&record.run_id) {
            return Err(Error::DuplicateRunId(record.run_id.clone()));
        }
        let mut stripped;
        let rec = if record.measure_values.is_empty() {
            record
        } else {
            stripped = record.clone();
            stripped.measure_values.clear();
            &stripped
        };
        serde_json::to_writer(&mut self.runs, rec)?;
        self.runs.write_all(b"\n")?;
        self.runs.flush()?;
        self.ids.insert(record.run_id.clone());
        Ok(())
    }

    pub fn append_measures(&mut self, entries: &[MeasureEntry]) -> Result<()> {
        for e in entries {
            serde_json::to_writer(&mut self.measures, e)?;
            self.measures.write_all(b"\n")?;
        }
        self.measures.flush()?;
        Ok(())
    }

    /// Write `config.toml`; an existing one must describe the same sweep.
    pub fn write_config(&self, cfg: &SweepConfig) -> Result<()> {
        let path = self.dir.join(CONFIG_FILE);
        if path.exists() {
            let existing = load_config(&self.dir)?;
            if existing.dataset != cfg.dataset || existing.model != cfg.model || existing.train != cfg.train {
                return Err(Error::Config(format!(
                    "{} was created from a different dataset/model/train config",
                    self.dir.display()
                )));
            }
        }
        fs::write(path, cfg.to_toml_string()?)?;
        Ok(())
    }
}
