//! Append-only self-report log shared by concurrent submitters.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::domain::WearFlag;
use crate::error::{Error, Result};
use crate::ingest::{context_log_to_string, parse_context_log, ContextEntry};
use crate::vocab::Vocabulary;

/// Submissions with the same payload this close together are one report.
pub const DEDUP_WINDOW_S: i64 = 1;

/// A context entry as submitted; the timestamp may be left to the receiver.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextSubmission {
    #[serde(default)]
    pub timestamp: Option<NaiveDateTime>,
    #[serde(default)]
    pub location: Option<String>,
    #[serde(default)]
    pub activities: Vec<String>,
    #[serde(default)]
    pub arousal: Option<u8>,
    #[serde(default)]
    pub wear_flag: WearFlag,
}

impl ContextSubmission {
    /// Fills a missing timestamp with `received`, truncated to whole seconds
    /// like every other log timestamp.
    pub fn into_entry(self, received: NaiveDateTime) -> ContextEntry {
        let ts = self.timestamp.unwrap_or(received);
        ContextEntry {
            timestamp: ts.with_nanosecond(0).unwrap_or(ts),
            location: self.location,
            activities: self.activities,
            arousal: self.arousal,
            wear_flag: self.wear_flag,
        }
    }
}

/// Stable machine-readable reason for a rejected entry.
pub fn rejection_code(err: &Error) -> &'static str {
    match err {
        Error::TooManySelections(_) => "too_many_selections",
        Error::NoSelections => "no_selections",
        Error::UnknownToken { .. } => "unknown_token",
        Error::Invalid(_) => "invalid_entry",
        Error::Io { .. } => "io_error",
        _ => "rejected",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AppendOutcome {
    Appended { entry: ContextEntry },
    Duplicate { entry: ContextEntry },
}

/// The log file plus an in-memory copy, behind one lock so appends are
/// totally ordered. Every append rewrites the file through a temporary
/// sibling and a rename, so a crash leaves either the old or the new log.
#[derive(Debug)]
pub struct ContextLog {
    path: PathBuf,
    vocab: Vocabulary,
    entries: Mutex<Vec<ContextEntry>>,
}

impl ContextLog {
    /// Opens an existing log, validating every row, or starts an empty one.
    pub fn open(path: &Path, vocab: Vocabulary) -> Result<ContextLog> {
        vocab.validate()?;
        let entries = if path.exists() {
            parse_context_log(path, &vocab)?
        } else {
            Vec::new()
        };
        Ok(ContextLog {
            path: path.to_path_buf(),
            vocab,
            entries: Mutex::new(entries),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("log lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn append(&self, entry: ContextEntry) -> Result<AppendOutcome> {
        entry.validate(&self.vocab)?;
        let mut entries = self.entries.lock().expect("log lock");
        let dup = entries.iter().rev().find(|e| {
            (e.timestamp - entry.timestamp).num_seconds().abs() <= DEDUP_WINDOW_S && e.same_payload(&entry)
        });
        if let Some(existing) = dup {
            return Ok(AppendOutcome::Duplicate { entry: existing.clone() });
        }
        let at = entries.partition_point(|e| e.timestamp <= entry.timestamp);
        entries.insert(at, entry.clone());
        if let Err(e) = write_atomic(&self.path, context_log_to_string(&entries).as_bytes()) {
            entries.remove(at);
            return Err(e);
        }
        Ok(AppendOutcome::Appended { entry })
    }

    /// The last `n` entries by timestamp, oldest first.
    pub fn recent(&self, n: usize) -> Vec<ContextEntry> {
        let entries = self.entries.lock().expect("log lock");
        entries[entries.len().saturating_sub(n)..].to_vec()
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    let tmp = path.with_file_name(name);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn t(s: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2022, 11, 3).unwrap().and_hms_opt(9, 0, s).unwrap()
    }

    fn entry(s: u32) -> ContextEntry {
        let mut e = ContextEntry::new(t(s));
        e.location = Some("gym".into());
        e.activities = vec!["exercising".into()];
        e
    }

    #[test]
    fn appends_and_dedups() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let log = ContextLog::open(&path, Vocabulary::default()).unwrap();
        assert!(matches!(log.append(entry(0)).unwrap(), AppendOutcome::Appended { .. }));
        assert!(matches!(log.append(entry(1)).unwrap(), AppendOutcome::Duplicate { .. }));
        assert!(matches!(log.append(entry(3)).unwrap(), AppendOutcome::Appended { .. }));
        let reread = parse_context_log(&path, &Vocabulary::default()).unwrap();
        assert_eq!(reread.len(), 2);
        assert!(!path.with_file_name("log.csv.tmp").exists());
    }

    #[test]
    fn rejected_entry_leaves_log_unchanged() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let log = ContextLog::open(&path, Vocabulary::default()).unwrap();
        log.append(entry(0)).unwrap();
        let before = fs::read(&path).unwrap();
        let mut five = entry(30);
        five.activities = vec!["exercising".into(), "walking".into(), "chores".into()];
        five.arousal = Some(4);
        let err = log.append(five).unwrap_err();
        assert_eq!(rejection_code(&err), "too_many_selections");
        assert_eq!(fs::read(&path).unwrap(), before);
        assert_eq!(log.len(), 1);
    }

    #[test]
    fn missing_timestamp_takes_receipt_time() {
        let sub = ContextSubmission {
            timestamp: None,
            location: Some("home".into()),
            activities: vec![],
            arousal: None,
            wear_flag: WearFlag::None,
        };
        let received = t(5).with_nanosecond(250_000_000).unwrap();
        assert_eq!(sub.into_entry(received).timestamp, t(5));
    }

    #[test]
    fn recent_returns_tail_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let log = ContextLog::open(&dir.path().join("log.csv"), Vocabulary::default()).unwrap();
        for s in [20, 0, 40] {
            log.append(entry(s)).unwrap();
        }
        let r = log.recent(2);
        assert_eq!(r.iter().map(|e| e.timestamp).collect::<Vec<_>>(), vec![t(20), t(40)]);
        assert_eq!(log.recent(10).len(), 3);
    }
}
